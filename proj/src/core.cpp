#include "mwld/core.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

namespace mwld {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

void check_mask(const LossVector& losses, const GroupMask& mask) {
  require(mask.size() == losses.size(),
          "group mask length " + std::to_string(mask.size()) + " does not match " +
              std::to_string(losses.size()) + " samples");
  require(!mask.empty_group(), "empty group: the conditional loss is undefined");
}

// Weighted sums over the members of a mask: (mass, mass-weighted loss).
std::pair<double, double> member_sums(const LossVector& losses, const GroupMask& mask) {
  CompensatedSum mass;
  CompensatedSum total;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (!mask.contains(i)) continue;
    const double w = losses.weight(i);
    mass.add(w);
    total.add(w * losses[i]);
  }
  return {mass.value(), total.value()};
}

}  // namespace

double compensated_sum(std::span<const double> xs) {
  CompensatedSum s;
  for (double x : xs) s.add(x);
  return s.value();
}

LossVector::LossVector(std::vector<double> values, double loss_bound)
    : LossVector(std::move(values), {}, loss_bound) {}

LossVector::LossVector(std::vector<double> values, std::vector<double> weights, double loss_bound)
    : values_(std::move(values)), weights_(std::move(weights)), loss_bound_(loss_bound) {
  require(!values_.empty(), "loss vector must contain at least one sample");
  require(std::isfinite(loss_bound_) && loss_bound_ > 0.0, "loss bound must be positive and finite");
  for (double v : values_) {
    require(std::isfinite(v), "loss values must be finite");
    require(v >= 0.0 && v <= loss_bound_,
            "loss value " + std::to_string(v) + " outside [0, " + std::to_string(loss_bound_) + "]");
  }
  if (!weights_.empty()) {
    require(weights_.size() == values_.size(), "weights and values differ in length");
    for (double w : weights_) require(std::isfinite(w) && w >= 0.0, "weights must be nonnegative");
    require(std::abs(compensated_sum(weights_) - 1.0) <= 1e-12, "weights must sum to 1");
  }
}

double LossVector::mean() const {
  if (weights_.empty()) return compensated_sum(values_) / static_cast<double>(values_.size());
  CompensatedSum s;
  for (std::size_t i = 0; i < values_.size(); ++i) s.add(weights_[i] * values_[i]);
  return s.value() / compensated_sum(weights_);
}

LossVector LossVector::rescaled() const {
  std::vector<double> v(values_.size());
  std::transform(values_.begin(), values_.end(), v.begin(),
                 [this](double x) { return std::min(1.0, x / loss_bound_); });
  return LossVector(std::move(v), weights_, 1.0);
}

GroupMask::GroupMask(std::vector<bool> members) : members_(members.begin(), members.end()) {}

GroupMask::GroupMask(std::initializer_list<bool> members)
    : members_(members.begin(), members.end()) {}

GroupMask GroupMask::from_indices(std::size_t n, std::span<const std::size_t> indices) {
  GroupMask m;
  m.members_.assign(n, 0);
  for (std::size_t i : indices) {
    require(i < n, "group index out of range");
    m.members_[i] = 1;
  }
  return m;
}

GroupMask GroupMask::full(std::size_t n) {
  GroupMask m;
  m.members_.assign(n, 1);
  return m;
}

std::size_t GroupMask::count() const {
  return static_cast<std::size_t>(std::count(members_.begin(), members_.end(), std::uint8_t{1}));
}

GroupMask GroupMask::complement() const {
  GroupMask m;
  m.members_.resize(members_.size());
  std::transform(members_.begin(), members_.end(), m.members_.begin(),
                 [](std::uint8_t b) { return static_cast<std::uint8_t>(b ? 0 : 1); });
  return m;
}

std::vector<std::size_t> GroupMask::indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < members_.size(); ++i)
    if (members_[i]) out.push_back(i);
  return out;
}

void validate_power_k(double k) {
  if (k == 0.0) {
    throw InvalidArgument(
        "k = 0 (uniform weighting over all groups) is not estimable from finite samples: "
        "there is no estimator that converges for it; use k in (0, 1]");
  }
  require(std::isfinite(k) && k > 0.0 && k <= 1.0, "weighting exponent k must lie in (0, 1]");
}

Weighting Weighting::power_k(double k) {
  validate_power_k(k);
  return Weighting(PowerK{k});
}

Weighting Weighting::explicit_set(std::vector<GroupMask> masks, WeightRule rule, double k) {
  require(!masks.empty(), "explicit group list must not be empty");
  if (rule == WeightRule::SizePower) validate_power_k(k);
  return Weighting(ExplicitSet{std::move(masks), rule, k});
}

Weighting Weighting::large_group(double alpha) {
  require(std::isfinite(alpha) && alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0, 1]");
  return Weighting(LargeGroup{alpha});
}

double Weighting::weight(const GroupMask& mask, double fraction) const {
  return std::visit(
      [&](const auto& w) -> double {
        using T = std::decay_t<decltype(w)>;
        if constexpr (std::is_same_v<T, PowerK>) {
          return std::pow(fraction, w.k);
        } else if constexpr (std::is_same_v<T, LargeGroup>) {
          return fraction >= w.alpha ? 1.0 : 0.0;
        } else {
          if (std::find(w.masks.begin(), w.masks.end(), mask) == w.masks.end()) return 0.0;
          return w.rule == WeightRule::Unit ? 1.0 : std::pow(fraction, w.k);
        }
      },
      kind_);
}

LabelVector::LabelVector(std::vector<int> labels) : labels_(std::move(labels)) {
  for (int y : labels_) require(y == 0 || y == 1, "labels must be 0 or 1");
}

std::size_t LabelVector::count(int label) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
}

SensitiveKeyVector::SensitiveKeyVector(const std::vector<Key>& keys) {
  std::map<Key, std::size_t> index;
  cells_.reserve(keys.size());
  for (const auto& k : keys) {
    auto [it, inserted] = index.try_emplace(k, distinct_.size());
    if (inserted) distinct_.push_back(k);
    cells_.push_back(it->second);
  }
}

SensitiveKeyVector SensitiveKeyVector::from_strings(const std::vector<std::string>& keys) {
  std::vector<Key> tuples;
  tuples.reserve(keys.size());
  for (const auto& k : keys) tuples.push_back(Key{k});
  return SensitiveKeyVector(tuples);
}

SensitiveKeyVector SensitiveKeyVector::subset(std::span<const std::size_t> rows) const {
  std::vector<Key> keys;
  keys.reserve(rows.size());
  for (std::size_t r : rows) keys.push_back(key(r));
  return SensitiveKeyVector(keys);
}

std::vector<GroupMask> SensitiveKeyVector::cell_masks() const {
  std::vector<std::vector<bool>> bits(distinct_.size(), std::vector<bool>(cells_.size(), false));
  for (std::size_t i = 0; i < cells_.size(); ++i) bits[cells_[i]][i] = true;
  std::vector<GroupMask> out;
  out.reserve(bits.size());
  for (auto& b : bits) out.emplace_back(std::move(b));
  return out;
}

double group_fraction(const LossVector& losses, const GroupMask& mask) {
  check_mask(losses, mask);
  if (losses.is_uniform())
    return static_cast<double>(mask.count()) / static_cast<double>(losses.size());
  return member_sums(losses, mask).first;
}

double group_mean(const LossVector& losses, const GroupMask& mask) {
  check_mask(losses, mask);
  const auto [mass, total] = member_sums(losses, mask);
  require(mass > 0.0, "group has zero probability mass");
  return total / mass;
}

double weighted_discrepancy(const LossVector& losses, const GroupMask& mask,
                            const Weighting& weighting) {
  const double fraction = group_fraction(losses, mask);
  const double w = weighting.weight(mask, fraction);
  if (w == 0.0) return 0.0;
  if (mask.count() == losses.size()) return 0.0;
  return w * std::abs(group_mean(losses, mask) - losses.mean());
}

double signed_mass_discrepancy(const LossVector& losses, const GroupMask& mask) {
  require(mask.size() == losses.size(), "group mask length does not match losses");
  if (mask.empty_group()) return 0.0;
  return group_fraction(losses, mask) * (group_mean(losses, mask) - losses.mean());
}

}  // namespace mwld
