#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mwld/core.hpp"

namespace mwld {

/// Raised on unreadable or malformed input files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(std::string_view name) const;
  bool operator==(const CsvTable&) const = default;
};

/// RFC 4180: comma separated, double-quote quoting with "" escapes, CRLF or LF
/// line ends, header row required.
CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::string& path);
void write_csv(const CsvTable& table, std::ostream& out);
void write_csv(const CsvTable& table, const std::string& path);

class Discretizer {
 public:
  enum class Kind { ThresholdLowHigh, Bins, Passthrough };

  /// "Low" below `cut`, "High" at or above it.
  static Discretizer threshold_low_high(double cut, std::string low = "Low",
                                        std::string high = "High");
  /// Left-closed bins: (-inf, e0), [e0, e1), ..., [e_last, inf).
  static Discretizer bins(std::vector<double> edges, std::vector<std::string> labels);
  /// Raw value as the level. With declared levels, values outside the list map
  /// to `fallback` when one is given and are rejected otherwise.
  static Discretizer passthrough(std::vector<std::string> levels = {}, std::string fallback = {});

  Kind kind() const { return kind_; }
  double cut() const { return cut_; }
  std::span<const double> edges() const { return edges_; }
  std::span<const std::string> levels() const { return levels_; }
  const std::string& fallback() const { return fallback_; }

  /// Number of distinct outputs; 0 for an undeclared passthrough.
  std::size_t cardinality() const;
  std::string apply(std::string_view raw) const;

  bool operator==(const Discretizer&) const = default;

 private:
  Kind kind_ = Kind::Passthrough;
  double cut_ = 0.0;
  std::vector<double> edges_;
  std::vector<std::string> levels_;  // bin labels, or the declared passthrough levels
  std::string fallback_;
};

enum class FeatureKind { Numeric, Categorical };

struct FeatureColumn {
  std::string name;
  FeatureKind kind = FeatureKind::Numeric;
  bool operator==(const FeatureColumn&) const = default;
};

struct SensitiveColumn {
  std::string name;
  Discretizer discretizer;
  bool operator==(const SensitiveColumn&) const = default;
};

/// Binary target: either membership in `positive_values` (rows whose value is
/// in neither list are dropped when `negative_values` is given), or, with
/// `top_fraction`, label 1 for the rows holding the top fraction of a numeric
/// column.
struct TargetSpec {
  std::string column;
  std::vector<std::string> positive_values;
  std::vector<std::string> negative_values;
  std::optional<double> top_fraction;
  bool operator==(const TargetSpec&) const = default;
};

struct DatasetSchema {
  std::string name;
  TargetSpec target;
  std::vector<SensitiveColumn> sensitive_columns;
  std::vector<FeatureColumn> feature_columns;
  /// When set, every header column that is not the target, not dropped and not
  /// listed in feature_columns becomes a feature of this kind.
  std::optional<FeatureKind> remaining_columns;
  std::vector<std::string> drop_columns;

  // Reference figures for the full dataset, reported for comparison only.
  std::optional<std::size_t> expected_records;
  std::optional<std::size_t> expected_attributes;
  std::optional<std::size_t> expected_settings;

  /// Product of sensitive discretizer cardinalities; 0 when any is undeclared.
  std::size_t predicted_settings() const;
  void validate() const;

  static DatasetSchema parse(std::string_view json_text);
  static DatasetSchema load(const std::string& path);
  std::string dump() const;

  bool operator==(const DatasetSchema&) const = default;
};

inline constexpr int kSchemaVersion = 1;

/// How one source column maps onto encoded feature columns.
struct EncodedColumn {
  std::string name;
  FeatureKind kind = FeatureKind::Numeric;
  double mean = 0.0;   // numeric: centering (and imputation) value
  double scale = 1.0;  // numeric: population standard deviation, 1 if degenerate
  std::vector<std::string> levels;  // categorical: one-hot levels in column order
  bool operator==(const EncodedColumn&) const = default;
};

inline constexpr std::string_view kUnknownLevel = "unknown";

struct FeatureManifest {
  std::vector<EncodedColumn> columns;
  std::optional<double> target_threshold;  // fitted cut for top_fraction targets

  std::size_t width() const;
  std::vector<std::string> feature_names() const;

  std::string dump() const;
  static FeatureManifest parse(std::string_view json_text);
  bool operator==(const FeatureManifest&) const = default;
};

struct LoadSummary {
  std::size_t rows_read = 0;
  std::size_t dropped_missing_target = 0;
  std::size_t dropped_missing_sensitive = 0;
  std::size_t raw_attribute_count = 0;   // header columns other than the target
  std::size_t used_attribute_count = 0;  // source columns that became features
  std::vector<std::string> warnings;
};

/// Encoded features (row-major), labels and sensitive keys, plus the source
/// cells needed to re-emit the rows.
struct TabularDataset {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> features;
  LabelVector labels{std::vector<int>{}};
  SensitiveKeyVector keys;
  FeatureManifest manifest;
  CsvTable raw;
  LoadSummary summary;

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * cols, cols);
  }
  std::size_t settings() const { return keys.cell_count(); }
  TabularDataset subset(std::span<const std::size_t> indices) const;
};

TabularDataset encode_table(const CsvTable& table, const DatasetSchema& schema,
                            const FeatureManifest* manifest = nullptr);
/// Fits the encoder on the file unless a manifest from an earlier fit is given.
TabularDataset load_csv(const std::string& path, const DatasetSchema& schema,
                        const FeatureManifest* manifest = nullptr);
void write_dataset_csv(const TabularDataset& dataset, const std::string& path);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded uniform shuffle; train gets floor(n (1 − f)) rows.
SplitIndices split_indices(std::size_t n, double test_fraction, std::uint64_t seed);
std::pair<TabularDataset, TabularDataset> split_train_test(const TabularDataset& dataset,
                                                           double test_fraction,
                                                           std::uint64_t seed);

/// Runs `metrics` on `repeats` independent splits and returns the element-wise mean.
std::vector<double> average_over_splits(
    const TabularDataset& dataset, double test_fraction, std::uint64_t seed, std::size_t repeats,
    const std::function<std::vector<double>(const TabularDataset&, const TabularDataset&)>&
        metrics);

/// Two sensitive groups with group-dependent Gaussian features; the minority's
/// label-flip rate exceeds the majority's by `noise_gap`.
TabularDataset synth_two_group(std::size_t n, double minority_fraction, double noise_gap,
                               std::uint64_t seed);
/// Schema matching the CSV emitted for synth_two_group data.
DatasetSchema two_group_schema();

struct LossAtom {
  double value;
  double probability;
};

/// i.i.d. sample of size n from a discrete loss distribution.
LossVector synth_discrete_loss_population(std::span<const LossAtom> atoms, std::size_t n,
                                          std::uint64_t seed);
/// The atom distribution itself as a weighted loss vector.
LossVector atom_population(std::span<const LossAtom> atoms);

}  // namespace mwld
