#include "doctest.h"

#include <cmath>
#include <random>

#include "mwld/core.hpp"
#include "mwld/model.hpp"
#include "oracles.hpp"

using namespace mwld;

TEST_CASE("predict_probability") {
  const std::vector<double> x = {0.3, -2.0};
  CHECK(predict_probability(LinearModel(2), x) == 0.5);
  const LinearModel m({0.0, 0.0, std::log(3.0)});
  CHECK(predict_probability(m, x) == doctest::Approx(0.75));
  double prev = 0.0;
  for (double b = -5; b <= 5; b += 0.5) {
    const double p = predict_probability(LinearModel({0.0, 0.0, b}), x);
    CHECK(p > prev);
    prev = p;
  }
  CHECK(predict_probability(LinearModel({0.0, 0.0, 700.0}), x) <= 1.0 - kProbabilityFloor);
  CHECK(predict_probability(LinearModel({0.0, 0.0, -700.0}), x) >= kProbabilityFloor);
  CHECK_THROWS_AS(predict_probability(m, std::vector<double>{1.0}), InvalidArgument);
  CHECK_THROWS_AS(predict_probability(m, std::vector<double>{1.0, NAN}), InvalidArgument);
}

TEST_CASE("log loss") {
  const std::vector<double> x = {1.0, 2.0};
  CHECK(log_loss(LinearModel(2), x, 0) == doctest::Approx(std::log(2.0)));
  CHECK(log_loss(LinearModel(2), x, 1) == doctest::Approx(0.6931472).epsilon(1e-7));
  const LinearModel m({0.0, 0.0, std::log(3.0)});
  CHECK(log_loss(m, x, 1) == doctest::Approx(0.2876821).epsilon(1e-7));
  CHECK(log_loss(m, x, 0) == doctest::Approx(1.3862944).epsilon(1e-7));
  CHECK_THROWS_AS(log_loss(m, x, 2), InvalidArgument);
  // Clamp keeps the loss at or below L.
  CHECK(log_loss(LinearModel({0.0, 0.0, 800.0}), x, 0) <= kLogLossBound + 1e-9);
  CHECK(kLogLossBound == doctest::Approx(27.631021));
}

TEST_CASE("zero-one loss") {
  const std::vector<double> x = {1.0};
  const LinearModel m({0.0, std::log(3.0)});
  CHECK(zero_one_loss(m, x, 1) == 0);
  CHECK(zero_one_loss(m, x, 0) == 1);
  CHECK(zero_one_loss(LinearModel(1), x, 1) == 0);
  CHECK(zero_one_loss(LinearModel(1), x, 0) == 1);
}

TEST_CASE("log loss gradient") {
  const std::vector<double> x = {0.5, -1.5};
  const auto g = log_loss_gradient(LinearModel(2), x, 1);
  REQUIRE(g.size() == 3);
  CHECK(g[0] == doctest::Approx(-0.25));
  CHECK(g[1] == doctest::Approx(0.75));
  CHECK(g[2] == doctest::Approx(-0.5));

  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + trial % 6;
    std::vector<double> w(d + 1), f(d);
    for (auto& v : w) v = z(rng);
    for (auto& v : f) v = z(rng);
    const int y = coin(rng);
    const auto analytic = log_loss_gradient(LinearModel(w), f, y);
    const auto numeric = oracle::central_gradient(
        [&](const std::vector<double>& ww) { return log_loss(LinearModel(ww), f, y); }, w, 1e-5);
    for (std::size_t j = 0; j <= d; ++j) {
      const double scale = std::max(1e-3, std::abs(analytic[j]));
      CHECK(std::abs(analytic[j] - numeric[j]) / scale <= 1e-6);
    }
  }
}

TEST_CASE("log loss is convex along segments") {
  std::mt19937_64 rng(6);
  // Logits stay well inside the clamp, where the loss is convex.
  std::normal_distribution<double> z(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(4), b(4), mid(4), f(3);
    for (auto& v : a) v = z(rng);
    for (auto& v : b) v = z(rng);
    for (auto& v : f) v = z(rng);
    for (int j = 0; j < 4; ++j) mid[j] = 0.5 * (a[j] + b[j]);
    const int y = trial % 2;
    CHECK(log_loss(LinearModel(mid), f, y) <=
          0.5 * (log_loss(LinearModel(a), f, y) + log_loss(LinearModel(b), f, y)) + 1e-12);
  }
}

TEST_CASE("model invariants") {
  CHECK_THROWS_AS(LinearModel(std::vector<double>{}), InvalidArgument);
  CHECK_THROWS_AS(LinearModel(std::vector<double>{INFINITY}), InvalidArgument);
  const LinearModel m({1.0, 2.0, 3.0});
  CHECK(m.feature_count() == 2);
  CHECK(m.dimension() == 3);
  CHECK(m.intercept() == 3.0);
}
