#include "mwld/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mwld/estimator.hpp"
#include "mwld/random.hpp"

namespace mwld {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

std::vector<std::size_t> all_rows(const TabularDataset& data) {
  std::vector<std::size_t> rows(data.rows);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

// Per-sample residuals with penalty = (1/n) Σ_i r_i² and
// gradient = (2/n) Σ_i r_i ∇ℓ_i (the centering terms sum to zero).
//   LV:  r_i = ℓ_i − ℓ̄_{y_i}
//   CLV: r_i = m_{a_i y_i} − m_{y_i}
std::vector<double> penalty_residuals(Objective objective, std::span<const double> losses,
                                      const TabularDataset& data,
                                      std::span<const std::size_t> rows) {
  const std::size_t n = rows.size();
  double label_sum[2] = {0.0, 0.0};
  std::size_t label_count[2] = {0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    const int y = data.labels[rows[i]];
    label_sum[y] += losses[i];
    ++label_count[y];
  }
  double label_mean[2];
  for (int b = 0; b < 2; ++b)
    label_mean[b] = label_count[b] ? label_sum[b] / static_cast<double>(label_count[b]) : 0.0;

  std::vector<double> r(n);
  if (objective == Objective::CLV) {
    const std::size_t t = data.keys.cell_count();
    std::vector<double> cell_sum(2 * t, 0.0);
    std::vector<std::size_t> cell_count(2 * t, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t slot = static_cast<std::size_t>(data.labels[rows[i]]) * t + data.keys.cell(rows[i]);
      cell_sum[slot] += losses[i];
      ++cell_count[slot];
    }
    for (std::size_t i = 0; i < n; ++i) {
      const int y = data.labels[rows[i]];
      const std::size_t slot = static_cast<std::size_t>(y) * t + data.keys.cell(rows[i]);
      r[i] = cell_sum[slot] / static_cast<double>(cell_count[slot]) - label_mean[y];
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) r[i] = losses[i] - label_mean[data.labels[rows[i]]];
  }
  return r;
}

double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

double mean_of(std::span<const double> v) {
  return compensated_sum(v) / static_cast<double>(v.size());
}

}  // namespace

std::string objective_name(Objective o) {
  switch (o) {
    case Objective::LR: return "lr";
    case Objective::LV: return "lv";
    case Objective::CLV: return "clv";
  }
  return "lr";
}

Objective parse_objective(std::string_view name) {
  if (name == "lr" || name == "LR") return Objective::LR;
  if (name == "lv" || name == "LV") return Objective::LV;
  if (name == "clv" || name == "CLV") return Objective::CLV;
  throw InvalidArgument("unknown objective '" + std::string(name) + "' (expected lr, lv or clv)");
}

void TrainConfig::validate() const {
  require(std::isfinite(eta) && eta >= 0.0, "eta must be a finite nonnegative number");
  require(std::isfinite(lambda) && lambda >= 0.0, "lambda must be a finite nonnegative number");
  require(std::isfinite(learning_rate) && learning_rate > 0.0, "learning rate must be positive");
  require(batch_size >= 1, "batch size must be positive");
  require(objective == Objective::LR || batch_size >= 2,
          "variance objectives need batch_size >= 2");
  require(epochs >= 1, "epochs must be positive");
}

std::vector<double> clv_lambda_grid() {
  std::vector<double> out;
  for (double u : kLambdaGrid) out.push_back(2.0 * u);
  return out;
}

std::vector<double> log_losses(const LinearModel& model, const TabularDataset& data,
                               std::span<const std::size_t> rows) {
  require(model.feature_count() == data.cols, "model and dataset feature widths differ");
  std::vector<double> out;
  if (rows.empty()) {
    out.reserve(data.rows);
    for (std::size_t i = 0; i < data.rows; ++i) out.push_back(log_loss(model, data.row(i), data.labels[i]));
  } else {
    out.reserve(rows.size());
    for (std::size_t i : rows) out.push_back(log_loss(model, data.row(i), data.labels[i]));
  }
  return out;
}

LossVector loss_vector(const LinearModel& model, const TabularDataset& data) {
  return LossVector(log_losses(model, data), kLogLossBound);
}

double penalty_value(Objective objective, std::span<const double> losses,
                     const TabularDataset& data, std::span<const std::size_t> rows) {
  require(losses.size() == rows.size() && !rows.empty(), "penalty needs one loss per row");
  const auto r = penalty_residuals(objective == Objective::LR ? Objective::LV : objective, losses,
                                   data, rows);
  CompensatedSum acc;
  for (double x : r) acc.add(x * x);
  return acc.value() / static_cast<double>(rows.size());
}

double objective_value(const LinearModel& model, const TabularDataset& data,
                       std::span<const std::size_t> rows, const TrainConfig& config) {
  require(!rows.empty(), "objective needs a nonempty batch");
  require(config.objective != Objective::CLV || data.keys.size() == data.rows,
          "CLV objective needs sensitive keys for every row");
  const auto losses = log_losses(model, data, rows);
  double value = mean_of(losses) + config.eta * squared_norm(model.weights());
  if (config.objective != Objective::LR && config.lambda != 0.0)
    value += config.lambda * penalty_value(config.objective, losses, data, rows);
  return value;
}

std::vector<double> objective_gradient(const LinearModel& model, const TabularDataset& data,
                                       std::span<const std::size_t> rows,
                                       const TrainConfig& config) {
  require(!rows.empty(), "objective needs a nonempty batch");
  require(model.feature_count() == data.cols, "model and dataset feature widths differ");
  require(config.objective != Objective::CLV || data.keys.size() == data.rows,
          "CLV objective needs sensitive keys for every row");
  const std::size_t n = rows.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<double> coef(n, inv_n);
  if (config.objective != Objective::LR && config.lambda != 0.0) {
    const auto losses = log_losses(model, data, rows);
    const auto r = penalty_residuals(config.objective, losses, data, rows);
    for (std::size_t i = 0; i < n; ++i) coef[i] += config.lambda * 2.0 * inv_n * r[i];
  }

  std::vector<double> grad(model.dimension(), 0.0);
  for (std::size_t i = 0; i < n; ++i)
    accumulate_log_loss_gradient(model, data.row(rows[i]), data.labels[rows[i]], coef[i], grad);
  const auto w = model.weights();
  for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += 2.0 * config.eta * w[j];
  return grad;
}

std::vector<std::vector<std::size_t>> epoch_batches(const TabularDataset& data,
                                                    const TrainConfig& config,
                                                    std::uint64_t epoch_seed) {
  std::mt19937_64 rng(epoch_seed);
  std::vector<std::size_t> order;
  if (config.stratify_by_label) {
    std::vector<std::size_t> by_label[2];
    for (std::size_t i = 0; i < data.rows; ++i) by_label[data.labels[i]].push_back(i);
    for (auto& v : by_label) std::shuffle(v.begin(), v.end(), rng);
    // Interleave by relative position within each class.
    struct Slot {
      double key;
      int label;
      std::size_t row;
    };
    std::vector<Slot> slots;
    slots.reserve(data.rows);
    for (int b = 0; b < 2; ++b) {
      const double m = static_cast<double>(by_label[b].size());
      for (std::size_t j = 0; j < by_label[b].size(); ++j)
        slots.push_back({(static_cast<double>(j) + 0.5) / m, b, by_label[b][j]});
    }
    std::sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) {
      return a.key != b.key ? a.key < b.key : a.label < b.label;
    });
    for (const auto& s : slots) order.push_back(s.row);
  } else {
    order = all_rows(data);
    std::shuffle(order.begin(), order.end(), rng);
  }

  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
    const std::size_t end = std::min(order.size(), start + config.batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  // A trailing single-sample batch carries no variance signal; fold it back.
  if (batches.size() > 1 && batches.back().size() < 2) {
    auto last = std::move(batches.back());
    batches.pop_back();
    batches.back().insert(batches.back().end(), last.begin(), last.end());
  }
  return batches;
}

namespace {

EpochRecord evaluate_epoch(const LinearModel& model, const TabularDataset& train,
                           const TabularDataset* test, Objective objective) {
  EpochRecord rec;
  const auto train_rows = all_rows(train);
  const auto train_losses = log_losses(model, train);
  rec.train_loss = mean_of(train_losses);
  rec.train_penalty = penalty_value(objective, train_losses, train, train_rows);
  if (test) {
    const auto test_rows = all_rows(*test);
    const auto test_losses = log_losses(model, *test);
    rec.test_loss = mean_of(test_losses);
    rec.test_penalty = penalty_value(objective, test_losses, *test, test_rows);
  }
  return rec;
}

}  // namespace

FitResult fit(const TabularDataset& train, const TrainConfig& config, const TabularDataset* test) {
  config.validate();
  require(train.rows >= 1, "training set is empty");
  if (test) require(test->cols == train.cols, "test set has a different feature width");
  LinearModel model(train.cols);
  TrainHistory history;
  history.has_test = test != nullptr;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto batches = epoch_batches(train, config, derive_seed(config.seed, epoch));
    for (const auto& batch : batches) {
      const auto grad = objective_gradient(model, train, batch, config);
      auto w = model.mutable_weights();
      for (std::size_t j = 0; j < w.size(); ++j) w[j] -= config.learning_rate * grad[j];
    }
    const auto rec = evaluate_epoch(model, train, test, config.objective);
    if (!std::isfinite(rec.train_loss) ||
        !std::all_of(model.weights().begin(), model.weights().end(),
                     [](double w) { return std::isfinite(w); })) {
      throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch + 1) +
                             ": mean train loss is not finite (learning rate " +
                             std::to_string(config.learning_rate) + ")");
    }
    history.epochs.push_back(rec);
  }
  return {std::move(model), std::move(history)};
}

std::vector<SweepRow> lambda_sweep(const TabularDataset& train, const TabularDataset& test,
                                   const TrainConfig& base, std::span<const double> lambdas) {
  require(!lambdas.empty(), "lambda sweep needs at least one value");
  for (double l : lambdas) require(std::isfinite(l) && l >= 0.0, "lambdas must be nonnegative");
  std::vector<double> sorted(lambdas.begin(), lambdas.end());
  std::stable_sort(sorted.begin(), sorted.end());
  std::vector<SweepRow> rows(sorted.size());
  const auto test_rows = all_rows(test);
  parallel_for(sorted.size(), [&](std::size_t i) {
    TrainConfig cfg = base;
    cfg.lambda = sorted[i];
    const auto result = fit(train, cfg);
    const auto losses = log_losses(result.model, test);
    rows[i] = SweepRow{sorted[i], mean_of(losses),
                       penalty_value(cfg.objective, losses, test, test_rows),
                       empirical_mwld(LossVector(losses, kLogLossBound), 0.5).value};
  });
  return rows;
}

double select_eta(const TabularDataset& train, const TabularDataset& validation,
                  const TrainConfig& base, std::span<const double> etas) {
  require(!etas.empty(), "eta grid is empty");
  std::vector<double> scores(etas.size());
  parallel_for(etas.size(), [&](std::size_t i) {
    TrainConfig cfg = base;
    cfg.eta = etas[i];
    cfg.lambda = 0.0;
    const auto result = fit(train, cfg);
    scores[i] = mean_of(log_losses(result.model, validation));
  });
  const auto best = std::min_element(scores.begin(), scores.end()) - scores.begin();
  return etas[static_cast<std::size_t>(best)];
}

}  // namespace mwld
