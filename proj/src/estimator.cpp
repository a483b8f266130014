#include "mwld/estimator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

namespace mwld {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

std::vector<std::size_t> sorted_order(const LossVector& losses) {
  // Sorting (value, index) pairs keeps the comparisons cache-local; the index
  // breaks ties so the order is the stable one.
  std::vector<std::pair<double, std::size_t>> keyed(losses.size());
  for (std::size_t i = 0; i < keyed.size(); ++i) keyed[i] = {losses[i], i};
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::size_t> order(keyed.size());
  for (std::size_t i = 0; i < keyed.size(); ++i) order[i] = keyed[i].second;
  return order;
}

// Mean computed from the sorted sequence so that the result depends on the
// multiset of losses only.
double sorted_mean(std::span<const double> sorted) {
  if (sorted.front() == sorted.back()) return sorted.front();  // exact for constant losses
  return compensated_sum(sorted) / static_cast<double>(sorted.size());
}

}  // namespace

MwldResult empirical_mwld(const LossVector& losses, double k) {
  validate_power_k(k);
  require(losses.is_uniform(),
          "the sorted scan is defined for uniform empirical weights; use brute_force_mwld for "
          "weighted atoms");
  const std::size_t n = losses.size();
  const auto order = sorted_order(losses);
  std::vector<double> sorted(n);
  for (std::size_t i = 0; i < n; ++i) sorted[i] = losses[order[i]];
  const double mu = sorted_mean(sorted);
  const double nd = static_cast<double>(n);

  double best = 0.0;
  ThresholdSide side = ThresholdSide::BelowThreshold;
  std::size_t best_t = n;

  CompensatedSum low;
  CompensatedSum high;
  for (std::size_t t = 1; t < n; ++t) {
    low.add(sorted[t - 1] - mu);
    high.add(sorted[n - t] - mu);
    const double td = static_cast<double>(t);
    const double weight = std::pow(td / nd, k);
    const double below = weight * std::abs(low.value() / td);
    const double above = weight * std::abs(high.value() / td);
    if (below > best) {
      best = below;
      side = ThresholdSide::BelowThreshold;
      best_t = t;
    }
    if (above > best) {
      best = above;
      side = ThresholdSide::AboveThreshold;
      best_t = t;
    }
  }

  std::vector<std::size_t> members;
  members.reserve(best_t);
  if (side == ThresholdSide::BelowThreshold) {
    members.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(best_t));
  } else {
    members.assign(order.end() - static_cast<std::ptrdiff_t>(best_t), order.end());
  }
  return MwldResult{best, side, best_t, GroupMask::from_indices(n, members)};
}

MwldResult brute_force_mwld(const LossVector& losses, const Weighting& weighting) {
  const std::size_t n = losses.size();
  require(n <= kBruteForceMaxSamples,
          "brute force enumeration is limited to " + std::to_string(kBruteForceMaxSamples) +
              " samples, got " + std::to_string(n));
  const bool needs_mask = std::holds_alternative<ExplicitSet>(weighting.kind());
  const double mu = losses.mean();
  const std::uint32_t full = (std::uint32_t{1} << n) - 1;

  MwldResult out;
  out.threshold_index = n;
  out.argmax_mask = GroupMask::full(n);
  std::uint32_t best_bits = full;

  bool constant = true;
  for (std::size_t i = 1; i < n; ++i) constant = constant && losses[i] == losses[0];
  if (constant) return out;

  std::vector<bool> bits(n);
  for (std::uint32_t s = 1; s <= full; ++s) {
    CompensatedSum mass;
    CompensatedSum total;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(s >> i & 1U)) continue;
      mass.add(losses.weight(i));
      total.add(losses.weight(i) * losses[i]);
    }
    if (mass.value() <= 0.0) continue;
    const double fraction = losses.is_uniform()
                                ? static_cast<double>(std::popcount(s)) / static_cast<double>(n)
                                : mass.value();
    double w;
    if (needs_mask) {
      for (std::size_t i = 0; i < n; ++i) bits[i] = (s >> i & 1U) != 0;
      w = weighting.weight(GroupMask(bits), fraction);
    } else {
      w = weighting.weight(GroupMask{}, fraction);
    }
    const double cond = total.value() / mass.value();
    const double d = s == full ? 0.0 : w * std::abs(cond - mu);
    if (d > out.value) {
      out.value = d;
      best_bits = s;
      out.argmax_side = cond <= mu ? ThresholdSide::BelowThreshold : ThresholdSide::AboveThreshold;
    }
  }
  for (std::size_t i = 0; i < n; ++i) bits[i] = (best_bits >> i & 1U) != 0;
  out.argmax_mask = GroupMask(bits);
  out.threshold_index = out.argmax_mask.count();
  return out;
}

ExplicitGroupResult mwld_over_explicit_groups(const LossVector& losses, const ExplicitSet& groups) {
  require(!groups.masks.empty(), "explicit group list must not be empty");
  if (groups.rule == WeightRule::SizePower) validate_power_k(groups.k);
  const double mu = losses.mean();
  ExplicitGroupResult out;
  bool first = true;
  for (std::size_t j = 0; j < groups.masks.size(); ++j) {
    const auto& mask = groups.masks[j];
    const double fraction = group_fraction(losses, mask);
    const double w = groups.rule == WeightRule::Unit ? 1.0 : std::pow(fraction, groups.k);
    const double d =
        mask.count() == losses.size() ? 0.0 : w * std::abs(group_mean(losses, mask) - mu);
    if (first || d > out.value) {
      out = {d, j};
      first = false;
    }
  }
  return out;
}

std::vector<double> discrepancy_size_profile(const LossVector& losses) {
  require(losses.is_uniform(), "size profiles are defined for uniform empirical weights");
  std::vector<double> sorted(losses.values().begin(), losses.values().end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double mu = sorted_mean(sorted);
  std::vector<double> profile(n, 0.0);
  CompensatedSum low;
  CompensatedSum high;
  for (std::size_t m = 1; m < n; ++m) {
    low.add(sorted[m - 1] - mu);
    high.add(sorted[n - m] - mu);
    const double md = static_cast<double>(m);
    profile[m - 1] = std::max(std::abs(low.value() / md), std::abs(high.value() / md));
  }
  return profile;
}

double max_discrepancy_at_size(const LossVector& losses, std::size_t m) {
  require(m >= 1 && m <= losses.size(),
          "group size " + std::to_string(m) + " outside [1, " + std::to_string(losses.size()) + "]");
  return discrepancy_size_profile(losses)[m - 1];
}

double large_group_mwld(const LossVector& losses, double alpha) {
  require(std::isfinite(alpha) && alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0, 1]");
  const auto profile = discrepancy_size_profile(losses);
  const double n = static_cast<double>(losses.size());
  // Smallest m with m/n >= alpha; guard against alpha*n landing a hair above an integer.
  auto m_min = static_cast<std::size_t>(std::ceil(alpha * n - 1e-9));
  m_min = std::max<std::size_t>(m_min, 1);
  double best = 0.0;
  for (std::size_t m = m_min; m <= losses.size(); ++m) best = std::max(best, profile[m - 1]);
  return best;
}

double group_loss_bound(double mwld_value, double group_weight) {
  require(group_weight > 0.0, "group weight must be positive");
  require(mwld_value >= 0.0, "MWLD value must be nonnegative");
  return mwld_value / group_weight;
}

double shifted_population_loss(const LossVector& losses, const GroupMask& mask, double w_g) {
  require(mask.size() == losses.size(), "group mask length does not match losses");
  const GroupMask rest = mask.complement();
  require(!mask.empty_group() && !rest.empty_group(),
          "demographic shift needs a group whose complement is nonempty");
  require(w_g >= 0.0 && w_g <= 1.0, "mixture weight must lie in [0, 1]");
  const double fraction = group_fraction(losses, mask);
  require(w_g >= fraction - 1e-12, "mixture weight must be at least the group fraction");
  return w_g * group_mean(losses, mask) + (1.0 - w_g) * group_mean(losses, rest);
}

double convergence_min_samples(double delta) { return 108.0 * std::log(18.0 / delta); }

ConvergenceBound convergence_error_bound(std::size_t n, double delta, double k) {
  require(delta > 0.0 && delta < 0.5, "delta must lie in (0, 0.5)");
  validate_power_k(k);
  const double base = convergence_min_samples(delta);
  require(static_cast<double>(n) >= base,
          "n = " + std::to_string(n) + " is below the validity threshold 108 ln(18/delta) = " +
              std::to_string(base));
  const double ratio = base / static_cast<double>(n);
  return ConvergenceBound{n, delta, k, std::pow(ratio, k / (2.0 * k + 1.0)),
                          std::pow(ratio, k / (2.0 * k + 2.0))};
}

}  // namespace mwld
