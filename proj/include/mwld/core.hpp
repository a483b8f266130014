#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace mwld {

/// Raised when an input violates a documented precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

double compensated_sum(std::span<const double> xs);

/// Per-sample losses with optional probability weights.
///
/// Values must lie in [0, loss_bound]. When weights are absent every sample
/// carries mass 1/n; otherwise the weights are a probability vector.
class LossVector {
 public:
  explicit LossVector(std::vector<double> values, double loss_bound = 1.0);
  LossVector(std::vector<double> values, std::vector<double> weights, double loss_bound = 1.0);

  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool is_uniform() const { return weights_.empty(); }
  /// Empty when uniform.
  std::span<const double> weights() const { return weights_; }
  double weight(std::size_t i) const {
    return weights_.empty() ? 1.0 / static_cast<double>(values_.size()) : weights_[i];
  }

  double loss_bound() const { return loss_bound_; }
  double mean() const;

  /// Same samples divided by loss_bound, so the result is bounded by 1.
  LossVector rescaled() const;

 private:
  std::vector<double> values_;
  std::vector<double> weights_;
  double loss_bound_;
};

/// Binary membership indicator over samples.
class GroupMask {
 public:
  GroupMask() = default;
  explicit GroupMask(std::vector<bool> members);
  GroupMask(std::initializer_list<bool> members);

  static GroupMask from_indices(std::size_t n, std::span<const std::size_t> indices);
  static GroupMask full(std::size_t n);

  std::size_t size() const { return members_.size(); }
  bool contains(std::size_t i) const { return members_[i] != 0; }
  std::size_t count() const;
  bool empty_group() const { return count() == 0; }
  GroupMask complement() const;
  std::vector<std::size_t> indices() const;

  bool operator==(const GroupMask&) const = default;

 private:
  std::vector<std::uint8_t> members_;
};

struct PowerK {
  double k;
  bool operator==(const PowerK&) const = default;
};

enum class WeightRule { Unit, SizePower };

/// A finite list of groups; every group outside the list has weight zero.
struct ExplicitSet {
  std::vector<GroupMask> masks;
  WeightRule rule = WeightRule::Unit;
  double k = 1.0;  // exponent for SizePower
  bool operator==(const ExplicitSet&) const = default;
};

/// w(g) = 1 when the group fraction is at least alpha, 0 otherwise.
struct LargeGroup {
  double alpha;
  bool operator==(const LargeGroup&) const = default;
};

class Weighting {
 public:
  using Kind = std::variant<PowerK, ExplicitSet, LargeGroup>;

  static Weighting power_k(double k);
  static Weighting explicit_set(std::vector<GroupMask> masks, WeightRule rule = WeightRule::Unit,
                                double k = 1.0);
  static Weighting large_group(double alpha);

  const Kind& kind() const { return kind_; }

  /// Weight of `mask` given its probability mass `fraction`.
  double weight(const GroupMask& mask, double fraction) const;

 private:
  explicit Weighting(Kind kind) : kind_(std::move(kind)) {}
  Kind kind_;
};

/// Rejects k outside (0, 1]; k = 0 gets a dedicated message.
void validate_power_k(double k);

class LabelVector {
 public:
  explicit LabelVector(std::vector<int> labels);
  LabelVector(std::initializer_list<int> labels) : LabelVector(std::vector<int>(labels)) {}

  std::size_t size() const { return labels_.size(); }
  int operator[](std::size_t i) const { return labels_[i]; }
  std::span<const int> labels() const { return labels_; }
  std::size_t count(int label) const;

 private:
  std::vector<int> labels_;
};

/// Per-sample sensitive keys, stored as dense cell ids into a table of
/// distinct key tuples. Cell ids follow first-appearance order.
class SensitiveKeyVector {
 public:
  using Key = std::vector<std::string>;

  SensitiveKeyVector() = default;
  explicit SensitiveKeyVector(const std::vector<Key>& keys);
  static SensitiveKeyVector from_strings(const std::vector<std::string>& keys);

  std::size_t size() const { return cells_.size(); }
  std::size_t cell(std::size_t i) const { return cells_[i]; }
  std::span<const std::size_t> cells() const { return cells_; }
  /// T, the number of distinct keys.
  std::size_t cell_count() const { return distinct_.size(); }
  const Key& key_of_cell(std::size_t c) const { return distinct_[c]; }
  const Key& key(std::size_t i) const { return distinct_[cells_[i]]; }

  SensitiveKeyVector subset(std::span<const std::size_t> rows) const;
  /// One mask per distinct cell, in cell order.
  std::vector<GroupMask> cell_masks() const;

 private:
  std::vector<std::size_t> cells_;
  std::vector<Key> distinct_;
};

double group_fraction(const LossVector& losses, const GroupMask& mask);
double group_mean(const LossVector& losses, const GroupMask& mask);
double weighted_discrepancy(const LossVector& losses, const GroupMask& mask,
                            const Weighting& weighting);

/// Ê[g]·(Ê[ℓ|g=1] − Ê[ℓ]), signed. Defined as 0 for an empty group.
double signed_mass_discrepancy(const LossVector& losses, const GroupMask& mask);

}  // namespace mwld
