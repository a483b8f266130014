#include "mwld/model.hpp"

#include <algorithm>
#include <string>

#include "mwld/core.hpp"

namespace mwld {

namespace {

void check_input(const LinearModel& model, std::span<const double> features) {
  if (features.size() != model.feature_count()) {
    throw InvalidArgument("feature vector has " + std::to_string(features.size()) +
                          " entries, model expects " + std::to_string(model.feature_count()));
  }
  for (double x : features)
    if (!std::isfinite(x)) throw InvalidArgument("non-finite feature value");
}

void check_label(int label) {
  if (label != 0 && label != 1) throw InvalidArgument("label must be 0 or 1");
}

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

double clamp_probability(double p) {
  return std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor);
}

// Probability assigned to `label`, computed without forming 1 − p.
double label_probability(double score, int label) {
  return clamp_probability(label == 1 ? sigmoid(score) : sigmoid(-score));
}

}  // namespace

LinearModel::LinearModel(std::size_t feature_count) : weights_(feature_count + 1, 0.0) {}

LinearModel::LinearModel(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.empty()) throw InvalidArgument("a linear model needs at least the intercept");
  for (double w : weights_)
    if (!std::isfinite(w)) throw InvalidArgument("model weights must be finite");
}

double LinearModel::score(std::span<const double> features) const {
  double s = weights_.back();
  for (std::size_t j = 0; j < features.size(); ++j) s += weights_[j] * features[j];
  return s;
}

double predict_probability(const LinearModel& model, std::span<const double> features) {
  check_input(model, features);
  return clamp_probability(sigmoid(model.score(features)));
}

double log_loss(const LinearModel& model, std::span<const double> features, int label) {
  check_input(model, features);
  check_label(label);
  return -std::log(label_probability(model.score(features), label));
}

int zero_one_loss(const LinearModel& model, std::span<const double> features, int label) {
  check_label(label);
  const int predicted = predict_probability(model, features) >= 0.5 ? 1 : 0;
  return predicted == label ? 0 : 1;
}

std::vector<double> log_loss_gradient(const LinearModel& model, std::span<const double> features,
                                      int label) {
  std::vector<double> g(model.dimension(), 0.0);
  check_input(model, features);
  check_label(label);
  accumulate_log_loss_gradient(model, features, label, 1.0, g);
  return g;
}

double accumulate_log_loss_gradient(const LinearModel& model, std::span<const double> features,
                                    int label, double scale, std::span<double> out) {
  const double s = model.score(features);
  const double residual = sigmoid(s) - static_cast<double>(label);
  const double c = scale * residual;
  for (std::size_t j = 0; j < features.size(); ++j) out[j] += c * features[j];
  out[features.size()] += c;
  return -std::log(label_probability(s, label));
}

}  // namespace mwld
