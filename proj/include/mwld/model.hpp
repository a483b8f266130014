#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace mwld {

/// Predicted probabilities are clamped to [kProbabilityFloor, 1 − kProbabilityFloor].
inline constexpr double kProbabilityFloor = 1e-12;

/// Largest attainable log loss, ln(1e12) ≈ 27.63. This is the declared loss
/// bound for every log-loss vector.
inline const double kLogLossBound = -std::log(kProbabilityFloor);

/// Logistic-regression weights; the intercept is the final coordinate.
class LinearModel {
 public:
  explicit LinearModel(std::size_t feature_count);
  explicit LinearModel(std::vector<double> weights);

  std::size_t feature_count() const { return weights_.size() - 1; }
  std::size_t dimension() const { return weights_.size(); }
  std::span<const double> weights() const { return weights_; }
  std::span<double> mutable_weights() { return weights_; }
  double intercept() const { return weights_.back(); }

  /// w·x + b
  double score(std::span<const double> features) const;

  bool operator==(const LinearModel&) const = default;

 private:
  std::vector<double> weights_;
};

/// Sigmoid of the affine score, stable for large |score|.
double predict_probability(const LinearModel& model, std::span<const double> features);

/// −y ln p − (1 − y) ln(1 − p) with p clamped.
double log_loss(const LinearModel& model, std::span<const double> features, int label);

/// 1 iff the thresholded prediction (p >= 0.5 means class 1) disagrees with the label.
int zero_one_loss(const LinearModel& model, std::span<const double> features, int label);

/// (p − y)·[x, 1], the gradient of log_loss in the weights.
std::vector<double> log_loss_gradient(const LinearModel& model, std::span<const double> features,
                                      int label);

/// Accumulates scale·(p − y)·[x, 1] into `out` and returns the log loss.
double accumulate_log_loss_gradient(const LinearModel& model, std::span<const double> features,
                                    int label, double scale, std::span<double> out);

}  // namespace mwld
