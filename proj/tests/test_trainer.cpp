#include "doctest.h"

#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "mwld/trainer.hpp"
#include "mwld/variance.hpp"
#include "oracles.hpp"

using namespace mwld;

namespace {

TabularDataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t d, int cells) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  std::uniform_int_distribution<int> cell(0, cells - 1);
  TabularDataset ds;
  ds.rows = n;
  ds.cols = d;
  ds.features.resize(n * d);
  for (auto& v : ds.features) v = z(rng);
  std::vector<int> y(n);
  std::vector<std::string> k(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = coin(rng);
    k[i] = std::to_string(cell(rng));
  }
  y[0] = 0;
  y[1] = 1;
  ds.labels = LabelVector(y);
  ds.keys = SensitiveKeyVector::from_strings(k);
  return ds;
}

std::vector<std::size_t> iota_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  std::iota(r.begin(), r.end(), std::size_t{0});
  return r;
}

std::vector<int> cells_of(const TabularDataset& d) {
  std::vector<int> c;
  for (std::size_t i = 0; i < d.rows; ++i) c.push_back(static_cast<int>(d.keys.cell(i)));
  return c;
}

}  // namespace

TEST_CASE("grids") {
  CHECK(kEtaGrid == std::vector<double>{0.1, 0.01, 0.001, 0.0001});
  CHECK(kLambdaGrid.size() == 10);
  const auto clv = clv_lambda_grid();
  REQUIRE(clv.size() == kLambdaGrid.size());
  for (std::size_t i = 0; i < clv.size(); ++i) CHECK(clv[i] == 2 * kLambdaGrid[i]);
}

TEST_CASE("config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.objective = Objective::LV;
  c.batch_size = 1;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = TrainConfig{};
  c.learning_rate = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = TrainConfig{};
  c.eta = -1;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  CHECK(parse_objective("clv") == Objective::CLV);
  CHECK_THROWS_AS(parse_objective("svm"), InvalidArgument);
}

TEST_CASE("objective value examples") {
  std::mt19937_64 rng(1);
  auto ds = random_dataset(rng, 20, 3, 2);
  const auto rows = iota_rows(ds.rows);
  const LinearModel zero(3);
  TrainConfig c;
  c.eta = 0.0;
  c.objective = Objective::LV;
  c.lambda = 1.0;
  CHECK(objective_value(zero, ds, rows, c) == doctest::Approx(std::log(2.0)));
  c.objective = Objective::LR;
  c.eta = 0.1;
  CHECK(objective_value(zero, ds, rows, c) == doctest::Approx(std::log(2.0)));

  const LinearModel m({0.3, -0.2, 0.5, 0.1});
  TrainConfig lr, lv;
  lv.objective = Objective::LV;
  lv.lambda = 0.0;
  CHECK(objective_value(m, ds, rows, lr) == objective_value(m, ds, rows, lv));
  CHECK(objective_gradient(m, ds, rows, lr) == objective_gradient(m, ds, rows, lv));
}

TEST_CASE("penalties agree with the variance oracles") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    auto ds = random_dataset(rng, 30, 2, 3);
    const auto rows = iota_rows(ds.rows);
    const LinearModel m({0.4 * trial / 50.0, -0.7, 0.2});
    const auto losses = log_losses(m, ds, rows);
    std::vector<int> y(ds.labels.labels().begin(), ds.labels.labels().end());
    CHECK(penalty_value(Objective::LV, losses, ds, rows) ==
          doctest::Approx(oracle::conditional_variance(losses, y)).epsilon(1e-12));
    CHECK(penalty_value(Objective::CLV, losses, ds, rows) ==
          doctest::Approx(oracle::conditional_coarse_variance(losses, cells_of(ds), y)).epsilon(1e-12));
  }
}

TEST_CASE("objective gradients match central differences") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(0.0, 0.7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto ds = random_dataset(rng, 40, 1 + trial % 5, 1 + trial % 4);
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < ds.rows; ++i)
      if (u(rng) < 0.6 || i < 2) rows.push_back(i);
    std::vector<double> w(ds.cols + 1);
    for (auto& v : w) v = z(rng);
    for (Objective o : {Objective::LR, Objective::LV, Objective::CLV}) {
      TrainConfig c;
      c.objective = o;
      c.eta = u(rng) * 0.1;
      c.lambda = u(rng) * 3.0;
      const auto analytic = objective_gradient(LinearModel(w), ds, rows, c);
      const auto numeric = oracle::central_gradient(
          [&](const std::vector<double>& ww) { return objective_value(LinearModel(ww), ds, rows, c); },
          w, 1e-5);
      for (std::size_t j = 0; j < w.size(); ++j) {
        const double scale = std::max(1e-4, std::abs(analytic[j]));
        CHECK(std::abs(analytic[j] - numeric[j]) / scale <= 1e-5);
      }
      ++checked;
    }
  }
  CHECK(checked == 300);
}

TEST_CASE("constant losses give no penalty gradient") {
  // θ = 0 gives every sample loss ln 2.
  std::mt19937_64 rng(4);
  auto ds = random_dataset(rng, 16, 3, 2);
  const auto rows = iota_rows(ds.rows);
  TrainConfig lr, lv, clv;
  lv.objective = Objective::LV;
  lv.lambda = 2.0;
  clv.objective = Objective::CLV;
  clv.lambda = 2.0;
  const auto g0 = objective_gradient(LinearModel(3), ds, rows, lr);
  const auto g1 = objective_gradient(LinearModel(3), ds, rows, lv);
  const auto g2 = objective_gradient(LinearModel(3), ds, rows, clv);
  for (std::size_t j = 0; j < g0.size(); ++j) {
    CHECK(g1[j] == doctest::Approx(g0[j]).epsilon(1e-15));
    CHECK(g2[j] == doctest::Approx(g0[j]).epsilon(1e-15));
  }
}

TEST_CASE("epoch batches partition the rows and keep both labels") {
  std::mt19937_64 rng(5);
  auto ds = random_dataset(rng, 1001, 2, 2);
  TrainConfig c;
  c.batch_size = 100;
  const auto batches = epoch_batches(ds, c, 9);
  std::set<std::size_t> seen;
  for (const auto& b : batches) {
    CHECK(b.size() >= 2);
    int ones = 0;
    for (std::size_t i : b) {
      CHECK(seen.insert(i).second);
      ones += ds.labels[i];
    }
    CHECK(ones > 0);
    CHECK(ones < static_cast<int>(b.size()));
  }
  CHECK(seen.size() == ds.rows);
  CHECK(epoch_batches(ds, c, 9) == batches);
  CHECK(epoch_batches(ds, c, 10) != batches);
}

TEST_CASE("separable data is fit exactly") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  TabularDataset ds;
  ds.rows = 200;
  ds.cols = 2;
  std::vector<int> y;
  std::vector<std::string> keys;
  for (std::size_t i = 0; i < ds.rows; ++i) {
    double a = u(rng), b = u(rng);
    const int label = a + b > 0 ? 1 : 0;
    const double push = label ? 0.2 : -0.2;  // margin
    ds.features.push_back(a + push);
    ds.features.push_back(b + push);
    y.push_back(label);
    keys.push_back("g");
  }
  ds.labels = LabelVector(y);
  ds.keys = SensitiveKeyVector::from_strings(keys);
  TrainConfig c;
  c.eta = 0.0;
  c.learning_rate = 0.5;
  c.epochs = 200;
  c.batch_size = 20;
  const auto fitted = fit(ds, c);
  int errors = 0;
  for (std::size_t i = 0; i < ds.rows; ++i) errors += zero_one_loss(fitted.model, ds.row(i), y[i]);
  CHECK(errors == 0);
}

TEST_CASE("fit is deterministic and lambda zero matches LR") {
  auto data = synth_two_group(600, 0.2, 0.3, 4);
  TrainConfig c;
  c.seed = 17;
  c.epochs = 5;
  const auto a = fit(data, c, &data);
  const auto b = fit(data, c, &data);
  CHECK(a.model == b.model);
  CHECK(a.history == b.history);
  CHECK(a.history.epochs.size() == 5);
  CHECK(a.history.has_test);
  for (Objective o : {Objective::LV, Objective::CLV}) {
    TrainConfig d = c;
    d.objective = o;
    CHECK(fit(data, d).model == a.model);
  }
  TrainConfig other = c;
  other.seed = 18;
  CHECK(!(fit(data, other).model == a.model));
}

TEST_CASE("large lambda lowers the conditional loss variance") {
  auto [train, test] = split_train_test(synth_two_group(3000, 0.2, 0.3, 8), 0.3, 8);
  TrainConfig c;
  c.objective = Objective::LV;
  c.seed = 1;
  const auto base = fit(train, c);
  c.lambda = 3.0;
  const auto reg = fit(train, c);
  const auto lb = loss_vector(base.model, train);
  const auto lr = loss_vector(reg.model, train);
  CHECK(conditional_loss_variance(lr, train.labels) < conditional_loss_variance(lb, train.labels));
}

TEST_CASE("lambda sweep") {
  auto [train, test] = split_train_test(synth_two_group(1500, 0.2, 0.3, 2), 0.3, 2);
  TrainConfig c;
  c.objective = Objective::LV;
  c.epochs = 20;
  const std::vector<double> lambdas = {3.0, 0.0, 1.0};
  const auto rows = lambda_sweep(train, test, c, lambdas);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].lambda == 0.0);
  CHECK(rows[1].lambda == 1.0);
  CHECK(rows[2].lambda == 3.0);
  CHECK(rows[2].test_penalty < rows[0].test_penalty);

  const std::vector<double> zero = {0.0};
  const auto single = lambda_sweep(train, test, c, zero);
  const auto plain = fit(train, c);
  CHECK(single[0].test_loss == loss_vector(plain.model, test).mean());
  CHECK(single[0] == rows[0]);
  CHECK_THROWS_AS(lambda_sweep(train, test, c, std::vector<double>{}), InvalidArgument);
  CHECK_THROWS_AS(lambda_sweep(train, test, c, std::vector<double>{-1.0}), InvalidArgument);
}

TEST_CASE("eta selection picks a grid value") {
  auto data = synth_two_group(800, 0.2, 0.1, 3);
  auto [train, valid] = split_train_test(data, 0.3, 3);
  TrainConfig c;
  c.epochs = 5;
  const double eta = select_eta(train, valid, c);
  CHECK(std::find(kEtaGrid.begin(), kEtaGrid.end(), eta) != kEtaGrid.end());
  CHECK(select_eta(train, valid, c) == eta);
}

TEST_CASE("divergence is reported") {
  auto data = synth_two_group(200, 0.2, 0.1, 3);
  TrainConfig c;
  c.learning_rate = 1e308;
  c.epochs = 3;
  CHECK_THROWS_AS(fit(data, c), TrainingDiverged);
}
