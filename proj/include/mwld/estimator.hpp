#pragma once

#include <cstddef>
#include <vector>

#include "mwld/core.hpp"

namespace mwld {

enum class ThresholdSide { BelowThreshold, AboveThreshold };

/// Maximizing group of an MWLD computation.
///
/// For the sorted scan, `threshold_index` is the number of sorted samples in
/// the argmax group and `argmax_side` tells whether the group holds the lowest
/// (BelowThreshold) or highest (AboveThreshold) losses. The mask is expressed
/// in the original sample order.
struct MwldResult {
  double value = 0.0;
  ThresholdSide argmax_side = ThresholdSide::BelowThreshold;
  std::size_t threshold_index = 0;
  GroupMask argmax_mask;
};

/// Plug-in MWLD(w^k) over all groups, computed in O(n log n).
///
/// Sorts the samples by loss and evaluates every prefix (t lowest losses) and
/// every suffix (t highest losses); the empirical maximizer always has one of
/// these two shapes. Requires uniform sample weights.
MwldResult empirical_mwld(const LossVector& losses, double k);

/// Exhaustive maximization over all 2^n - 1 nonempty groups. Honors
/// probability weights, so on a small discrete support it returns the exact
/// population MWLD. Limited to n <= 20.
MwldResult brute_force_mwld(const LossVector& losses, const Weighting& weighting);

inline constexpr std::size_t kBruteForceMaxSamples = 20;

struct ExplicitGroupResult {
  double value = 0.0;
  std::size_t argmax_index = 0;
};

/// Maximum weighted discrepancy over a finite group list; ties go to the
/// lowest index.
ExplicitGroupResult mwld_over_explicit_groups(const LossVector& losses, const ExplicitSet& groups);

/// max over groups of exactly m samples of |Ê[ℓ|g=1] − Ê[ℓ]|.
double max_discrepancy_at_size(const LossVector& losses, std::size_t m);

/// max_discrepancy_at_size for every m = 1..n, in one sorted pass.
/// Element m-1 holds the value for size m.
std::vector<double> discrepancy_size_profile(const LossVector& losses);

/// MWLD under w(g) = 1[Ê[g] >= alpha], via the size profile restricted to
/// m >= ceil(alpha n).
double large_group_mwld(const LossVector& losses, double alpha);

/// Upper bound on |Ê[ℓ|g=1] − Ê[ℓ]| for a group of weight `group_weight`.
double group_loss_bound(double mwld_value, double group_weight);

/// Expected loss under the mixture w_g·P(·|g=1) + (1 − w_g)·P(·|g=0).
double shifted_population_loss(const LossVector& losses, const GroupMask& mask, double w_g);

struct ConvergenceBound {
  std::size_t n = 0;
  double delta = 0.0;
  double k = 0.0;
  double lower_side_bound = 0.0;  // (108 ln(18/δ)/n)^(k/(2k+1))
  double upper_side_bound = 0.0;  // (108 ln(18/δ)/n)^(k/(2k+2))

  double looser() const { return lower_side_bound > upper_side_bound ? lower_side_bound : upper_side_bound; }
  bool operator==(const ConvergenceBound&) const = default;
};

/// Smallest n for which the explicit convergence rates apply.
double convergence_min_samples(double delta);

ConvergenceBound convergence_error_bound(std::size_t n, double delta, double k);

}  // namespace mwld
