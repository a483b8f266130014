#include "mwld/variance.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace mwld {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

// Mass and mass-weighted loss per cell.
struct CellStats {
  std::vector<CompensatedSum> mass;
  std::vector<CompensatedSum> total;
  explicit CellStats(std::size_t cells) : mass(cells), total(cells) {}

  double mean(std::size_t c) const { return total[c].value() / mass[c].value(); }
};

// Σ_c mass_c (m_c − m)² / Σ_c mass_c over cells with positive mass.
double between_cell_variance(const CellStats& stats) {
  CompensatedSum mass;
  CompensatedSum total;
  for (std::size_t c = 0; c < stats.mass.size(); ++c) {
    mass.add(stats.mass[c].value());
    total.add(stats.total[c].value());
  }
  const double m = total.value() / mass.value();
  CompensatedSum acc;
  for (std::size_t c = 0; c < stats.mass.size(); ++c) {
    const double w = stats.mass[c].value();
    if (w <= 0.0) continue;
    const double d = stats.mean(c) - m;
    acc.add(w * d * d);
  }
  return acc.value() / mass.value();
}

void require_both_labels(const LabelVector& labels) {
  require(labels.count(0) > 0 && labels.count(1) > 0,
          "label-conditioned variance needs both label classes present");
}

}  // namespace

double loss_variance(const LossVector& losses) {
  const double m = losses.mean();
  CompensatedSum acc;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const double d = losses[i] - m;
    acc.add(losses.weight(i) * d * d);
  }
  return losses.is_uniform() ? acc.value() : acc.value() / compensated_sum(losses.weights());
}

double unbiased_loss_variance(const LossVector& losses) {
  require(losses.is_uniform(), "the unbiased variance is defined for uniform samples");
  require(losses.size() >= 2, "unbiased variance needs at least two samples");
  const double n = static_cast<double>(losses.size());
  return loss_variance(losses) * n / (n - 1.0);
}

double conditional_loss_variance(const LossVector& losses, const LabelVector& labels) {
  require(labels.size() == losses.size(), "labels and losses differ in length");
  require_both_labels(labels);
  CellStats by_label(2);
  for (std::size_t i = 0; i < losses.size(); ++i) {
    by_label.mass[labels[i]].add(losses.weight(i));
    by_label.total[labels[i]].add(losses.weight(i) * losses[i]);
  }
  CompensatedSum within[2];
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const int b = labels[i];
    const double d = losses[i] - by_label.mean(b);
    within[b].add(losses.weight(i) * d * d);
  }
  // p̂(b)·Var̂[ℓ|b] = mass_b · (Σ_{i∈b} w_i d_i² / mass_b) = Σ_{i∈b} w_i d_i².
  const double mass = by_label.mass[0].value() + by_label.mass[1].value();
  return (within[0].value() + within[1].value()) / mass;
}

double coarse_loss_variance(const LossVector& losses, const SensitiveKeyVector& keys) {
  require(keys.size() == losses.size(), "sensitive keys and losses differ in length");
  CellStats stats(keys.cell_count());
  for (std::size_t i = 0; i < losses.size(); ++i) {
    stats.mass[keys.cell(i)].add(losses.weight(i));
    stats.total[keys.cell(i)].add(losses.weight(i) * losses[i]);
  }
  return between_cell_variance(stats);
}

double conditional_coarse_loss_variance(const LossVector& losses, const SensitiveKeyVector& keys,
                                        const LabelVector& labels) {
  require(keys.size() == losses.size(), "sensitive keys and losses differ in length");
  require(labels.size() == losses.size(), "labels and losses differ in length");
  require_both_labels(labels);
  const std::size_t t = keys.cell_count();
  CellStats per_label[2] = {CellStats(t), CellStats(t)};
  for (std::size_t i = 0; i < losses.size(); ++i) {
    auto& s = per_label[labels[i]];
    s.mass[keys.cell(i)].add(losses.weight(i));
    s.total[keys.cell(i)].add(losses.weight(i) * losses[i]);
  }
  double label_mass[2] = {0.0, 0.0};
  for (int b = 0; b < 2; ++b)
    for (const auto& m : per_label[b].mass) label_mass[b] += m.value();
  const double mass = label_mass[0] + label_mass[1];
  return (label_mass[0] * between_cell_variance(per_label[0]) +
          label_mass[1] * between_cell_variance(per_label[1])) /
         mass;
}

double sandwich_envelope(double x) {
  require(std::isfinite(x) && x >= 0.0, "envelope argument must be nonnegative");
  require(x <= 1.0, "envelope is defined for MWLD(w^1/2) <= 1 (losses in [0, 1])");
  if (x == 0.0) return 0.0;
  return x * std::sqrt(2.0 - 4.0 * std::log(x));
}

VarianceSandwich sandwich(double mwld_half, double sqrt_variance) {
  require(sqrt_variance >= 0.0, "sqrt variance must be nonnegative");
  return VarianceSandwich{mwld_half, sqrt_variance, sandwich_envelope(mwld_half)};
}

double variance_upper_bound_general_L(double gamma, double L) {
  require(gamma > 0.0, "gamma must be positive");
  require(gamma <= L, "gamma must not exceed the loss bound L");
  return 2.0 * gamma * gamma * (1.0 + 2.0 * std::log(L / gamma));
}

double maurer_deviation(std::size_t n, double delta) {
  require(n >= 2, "the Maurer radius needs n >= 2");
  require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  return std::sqrt(2.0 * std::log(2.0 / delta) / static_cast<double>(n - 1));
}

double coarse_deviation(std::size_t n, double delta, std::size_t settings) {
  require(n > 2, "the coarse radius needs n > 2");
  require(settings >= 1, "the number of sensitive settings must be at least 1");
  require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  const double log_term = std::log(2.0 / delta);
  const double nd = static_cast<double>(n);
  return std::sqrt(2.0 * log_term / (nd - 1.0)) +
         std::sqrt((2.0 * static_cast<double>(settings) + 8.0) * log_term / nd);
}

}  // namespace mwld
