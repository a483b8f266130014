#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mwld/data.hpp"
#include "mwld/estimator.hpp"
#include "mwld/model.hpp"
#include "mwld/trainer.hpp"
#include "mwld/variance.hpp"

namespace mwld {

inline constexpr int kReportSchemaVersion = 1;

struct ReportMetadata {
  int schema_version = kReportSchemaVersion;
  std::string command;
  std::uint64_t seed = 0;
  std::string config_digest;
  std::string loss_kind = "log_loss";
  double loss_bound = 1.0;
  /// True when sandwich quantities were computed on losses / loss_bound.
  bool rescaled = false;
  /// Resolved configuration, flattened to strings.
  std::map<std::string, std::string> config;
  bool operator==(const ReportMetadata&) const = default;
};

struct KSweepRow {
  double k = 0.0;
  double train_mwld = 0.0;
  double test_mwld = 0.0;
  double gap = 0.0;  // |train − test|
  bool operator==(const KSweepRow&) const = default;
};

struct KSweepSection {
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::vector<KSweepRow> rows;
  bool operator==(const KSweepSection&) const = default;
};

struct SizeProfileRow {
  std::size_t m = 0;
  double profile = 0.0;
  std::vector<double> envelopes;  // one per k: MWLD(w^k) / (m/n)^k
  bool operator==(const SizeProfileRow&) const = default;
};

struct SizeProfileSection {
  std::size_t n = 0;
  std::vector<double> ks;
  std::vector<double> mwld;  // MWLD(w^k) per k
  std::vector<SizeProfileRow> rows;
  bool operator==(const SizeProfileSection&) const = default;
};

struct VarianceBlock {
  std::size_t n = 0;
  std::size_t settings = 0;
  double mean_loss = 0.0;
  double loss_variance = 0.0;
  double conditional_loss_variance = 0.0;
  double coarse_loss_variance = 0.0;
  double conditional_coarse_loss_variance = 0.0;
  double mwld_half = 0.0;            // on the original loss scale
  double general_bound = 0.0;        // 2γ²(1 + 2 ln(L/γ)), original scale
  double rescale_factor = 1.0;       // sandwich values are divided by this
  VarianceSandwich sandwich;         // on the rescaled losses
  bool operator==(const VarianceBlock&) const = default;
};

struct BoundsBlock {
  std::size_t n = 0;
  double delta = 0.0;
  std::size_t settings = 0;
  /// Empty when n is below 108 ln(18/δ).
  std::vector<ConvergenceBound> convergence;
  double maurer_radius = 0.0;
  double coarse_radius = 0.0;
  bool operator==(const BoundsBlock&) const = default;
};

struct SweepCurveRow {
  std::string objective;
  double lambda = 0.0;
  double test_loss = 0.0;
  double conditional_lv = 0.0;
  double conditional_clv = 0.0;
  double mwld_half_y0 = 0.0;
  double mwld_half_y1 = 0.0;
  double explicit_group_mwld = 0.0;  // over the sensitive cells, weight Ê[g]^{1/2}
  bool operator==(const SweepCurveRow&) const = default;
};

struct SweepSection {
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  double eta = 0.0;
  std::vector<SweepCurveRow> rows;
  bool operator==(const SweepSection&) const = default;
};

struct ShiftSection {
  std::size_t n = 0;
  double k = 0.0;
  std::size_t trials = 0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;  // empty or full masks
  double mwld = 0.0;
  double min_margin = 0.0;
  bool operator==(const ShiftSection&) const = default;
};

struct AuditReport {
  ReportMetadata metadata;
  std::optional<KSweepSection> mwld_by_k;
  std::optional<SizeProfileSection> size_profile;
  std::optional<VarianceBlock> variance_block;
  std::optional<BoundsBlock> bounds_block;
  std::optional<SweepSection> sweep_curves;
  std::optional<ShiftSection> shift_checks;
  bool operator==(const AuditReport&) const = default;
};

// --- sections -------------------------------------------------------------

KSweepSection k_sweep(const LossVector& train, const LossVector& test, std::span<const double> ks);
KSweepSection k_sweep(const LinearModel& model, const TabularDataset& train,
                      const TabularDataset& test, std::span<const double> ks);

SizeProfileSection size_profile(const LossVector& losses, std::span<const std::size_t> sizes,
                                std::span<const double> ks);
SizeProfileSection size_profile(const LinearModel& model, const TabularDataset& dataset,
                                std::span<const std::size_t> sizes, std::span<const double> ks);
/// About `count` sizes spread evenly over 1..n (always including 1 and n).
std::vector<std::size_t> default_sizes(std::size_t n, std::size_t count = 50);

/// (Ê[ℓ] + MWLD(w^k)) − loss under the mixture tilted toward `mask` by Ê[g]^k.
double shift_margin(const LossVector& losses, const GroupMask& mask, double k, double mwld_value);
ShiftSection shift_check(const LossVector& losses, double k, std::size_t trials, std::uint64_t seed);
ShiftSection shift_check(const LinearModel& model, const TabularDataset& dataset, double k,
                         std::size_t trials, std::uint64_t seed);

VarianceBlock variance_block(const LossVector& losses, const LabelVector& labels,
                             const SensitiveKeyVector& keys);
BoundsBlock bounds_block(std::size_t n, double delta, std::size_t settings,
                         std::span<const double> ks);

/// Metrics of one trained model on held-out data, as recorded per sweep row.
SweepCurveRow evaluate_tradeoff_point(const LinearModel& model, const TabularDataset& test,
                                      Objective objective, double lambda);
/// LV sweep over `lv_lambdas` and CLV sweep over `clv_lambdas`, same base seed.
SweepSection tradeoff_report(const TabularDataset& train, const TabularDataset& test,
                             const TrainConfig& base, std::span<const double> lv_lambdas,
                             std::span<const double> clv_lambdas);

// --- Monte Carlo harnesses ------------------------------------------------

struct ConvergenceStudy {
  double population_mwld = 0.0;
  ConvergenceBound bound;
  std::vector<double> deviations;  // |empirical − population| per trial
  std::size_t exceed_count = 0;    // deviations above lower + upper side
  double median_deviation = 0.0;
};

/// Samples `trials` datasets of size n from the atoms (trial i uses
/// derive_seed(seed, i)) and compares the scan estimate with the exact
/// population MWLD from the weighted brute force. Output does not depend on
/// `threads`.
ConvergenceStudy convergence_study(std::span<const LossAtom> atoms, std::size_t n, double k,
                                   double delta, std::size_t trials, std::uint64_t seed,
                                   std::size_t threads = 0);

// --- serialization --------------------------------------------------------

/// 64-bit FNV-1a of `text`, as 16 hex digits.
std::string config_digest(std::string_view text);
std::string canonical_config(const std::map<std::string, std::string>& config);

std::string dump_report(const AuditReport& report);
AuditReport parse_report(std::string_view text, std::vector<std::string>* warnings = nullptr);
void write_report(const AuditReport& report, const std::string& path);
AuditReport read_report(const std::string& path, std::vector<std::string>* warnings = nullptr);

/// Tidy per-curve tables: header row, then values rendered with 17
/// significant digits.
struct CurveTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels;  // optional leading text column, one per row
  std::string label_header;
};
std::string format_number(double v);
void write_curve_csv(const CurveTable& table, const std::string& path);
std::map<std::string, CurveTable> curve_tables(const AuditReport& report);

}  // namespace mwld
