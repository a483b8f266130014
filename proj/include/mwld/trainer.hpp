#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mwld/data.hpp"
#include "mwld/model.hpp"

namespace mwld {

enum class Objective { LR, LV, CLV };

std::string objective_name(Objective o);
Objective parse_objective(std::string_view name);

/// LR: mean log loss + η‖θ‖². LV adds λ·Ê[Var̂[ℓ|y]]; CLV adds
/// λ·Ê[Var̂[Ê[ℓ|A,y]|y]]. Penalties are evaluated on each minibatch.
struct TrainConfig {
  Objective objective = Objective::LR;
  double eta = 1e-3;
  double lambda = 0.0;
  double learning_rate = 0.1;
  std::size_t batch_size = 128;
  std::size_t epochs = 40;
  std::uint64_t seed = 0;
  bool stratify_by_label = true;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// η grid searched at λ = 0.
inline const std::vector<double> kEtaGrid = {0.1, 0.01, 0.001, 0.0001};
/// λ grid for the LV objective; CLV uses twice these values.
inline const std::vector<double> kLambdaGrid = {0, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1, 2, 3};
std::vector<double> clv_lambda_grid();

struct EpochRecord {
  double train_loss = 0.0;
  double train_penalty = 0.0;
  double test_loss = 0.0;     // 0 when no held-out set was given
  double test_penalty = 0.0;
  bool operator==(const EpochRecord&) const = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  bool has_test = false;
  bool operator==(const TrainHistory&) const = default;
};

/// Raised when the mean training loss stops being finite.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-sample log losses of `model` on the selected rows (all rows if empty).
std::vector<double> log_losses(const LinearModel& model, const TabularDataset& data,
                               std::span<const std::size_t> rows = {});
LossVector loss_vector(const LinearModel& model, const TabularDataset& data);

/// Penalty term of `objective` on the given rows. LR reports the LV penalty.
double penalty_value(Objective objective, std::span<const double> losses,
                     const TabularDataset& data, std::span<const std::size_t> rows);

double objective_value(const LinearModel& model, const TabularDataset& data,
                       std::span<const std::size_t> rows, const TrainConfig& config);
std::vector<double> objective_gradient(const LinearModel& model, const TabularDataset& data,
                                       std::span<const std::size_t> rows,
                                       const TrainConfig& config);

/// Minibatch order for one epoch. Stratified batches interleave the label
/// classes so that every batch holds both in proportion.
std::vector<std::vector<std::size_t>> epoch_batches(const TabularDataset& data,
                                                    const TrainConfig& config,
                                                    std::uint64_t epoch_seed);

struct FitResult {
  LinearModel model;
  TrainHistory history;
};

/// Constant-step minibatch SGD from zero weights. Deterministic in config.seed.
FitResult fit(const TabularDataset& train, const TrainConfig& config,
              const TabularDataset* test = nullptr);

struct SweepRow {
  double lambda = 0.0;
  double test_loss = 0.0;
  double test_penalty = 0.0;
  double test_mwld_half = 0.0;
  bool operator==(const SweepRow&) const = default;
};

/// One fit per λ with the base seed, evaluated on `test`; rows ordered by λ.
std::vector<SweepRow> lambda_sweep(const TabularDataset& train, const TabularDataset& test,
                                   const TrainConfig& base, std::span<const double> lambdas);

/// Picks η from the grid by mean validation log loss at λ = 0.
double select_eta(const TabularDataset& train, const TabularDataset& validation,
                  const TrainConfig& base, std::span<const double> etas = kEtaGrid);

}  // namespace mwld
