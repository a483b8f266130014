#include "doctest.h"

#include <cmath>
#include <random>

#include "mwld/core.hpp"
#include "oracles.hpp"

using namespace mwld;

namespace {
const std::vector<double> kFour = {0.0, 0.2, 0.8, 1.0};
}

TEST_CASE("loss vector validation") {
  CHECK_THROWS_AS(LossVector(std::vector<double>{}), InvalidArgument);
  CHECK_THROWS_AS(LossVector({0.5, 1.5}), InvalidArgument);
  CHECK_THROWS_AS(LossVector({-0.1}), InvalidArgument);
  CHECK_THROWS_AS(LossVector({NAN}), InvalidArgument);
  CHECK_THROWS_AS(LossVector({0.1, 0.2}, {0.5, 0.6}), InvalidArgument);
  CHECK_THROWS_AS(LossVector({0.1, 0.2}, std::vector<double>{1.0}), InvalidArgument);
  CHECK_THROWS_AS(LossVector({0.1, 0.2}, {-0.5, 1.5}), InvalidArgument);
  CHECK_NOTHROW(LossVector({3.0, 7.0}, 10.0));
  CHECK(LossVector({3.0, 7.0}, 10.0).rescaled().values()[1] == doctest::Approx(0.7));
}

TEST_CASE("group_fraction") {
  LossVector u({0.1, 0.2, 0.3, 0.4});
  CHECK(group_fraction(u, {true, true, false, false}) == 0.5);
  CHECK(group_fraction(u, {true, true, true, true}) == 1.0);
  LossVector w({0.1, 0.2, 0.3, 0.4}, {0.1, 0.2, 0.3, 0.4});
  CHECK(group_fraction(w, {false, false, true, true}) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK_THROWS_AS(group_fraction(u, {false, false, false, false}), InvalidArgument);
  CHECK_THROWS_AS(group_fraction(u, {true, false}), InvalidArgument);
}

TEST_CASE("group_mean") {
  CHECK(group_mean(LossVector({0, 1, 0, 1}), {false, true, false, true}) == 1.0);
  CHECK(group_mean(LossVector(kFour), {true, true, false, false}) == doctest::Approx(0.1));
  CHECK(group_mean(LossVector({0.5}), {true}) == 0.5);
  CHECK_THROWS_AS(group_mean(LossVector({0.5, 0.2}), {false, false}), InvalidArgument);
}

TEST_CASE("weighted_discrepancy examples") {
  const LossVector l(kFour);
  CHECK(weighted_discrepancy(l, {true, true, false, false}, Weighting::power_k(0.5)) ==
        doctest::Approx(0.2828427).epsilon(1e-7));
  CHECK(weighted_discrepancy(l, GroupMask::full(4), Weighting::power_k(0.3)) == 0.0);
  CHECK(weighted_discrepancy(LossVector({0, 1}), {false, true}, Weighting::power_k(1.0)) ==
        doctest::Approx(0.25));
}

TEST_CASE("k = 0 is rejected with the impossibility message") {
  try {
    Weighting::power_k(0.0);
    FAIL("expected a throw");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("no estimator") != std::string::npos);
  }
  CHECK_THROWS_AS(Weighting::power_k(1.5), InvalidArgument);
  CHECK_THROWS_AS(Weighting::power_k(-0.2), InvalidArgument);
  CHECK_THROWS_AS(Weighting::large_group(0.0), InvalidArgument);
  CHECK_THROWS_AS(Weighting::large_group(1.2), InvalidArgument);
}

TEST_CASE("explicit set and large group weights") {
  const GroupMask a{true, true, false, false};
  const GroupMask b{false, true, true, false};
  const auto unit = Weighting::explicit_set({a}, WeightRule::Unit);
  CHECK(unit.weight(a, 0.5) == 1.0);
  CHECK(unit.weight(b, 0.5) == 0.0);
  const auto sized = Weighting::explicit_set({a}, WeightRule::SizePower, 1.0);
  CHECK(sized.weight(a, 0.5) == 0.5);
  const auto large = Weighting::large_group(0.5);
  CHECK(large.weight(a, 0.5) == 1.0);
  CHECK(large.weight(a, 0.25) == 0.0);
}

TEST_CASE("discrepancy properties on random inputs") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> size(1, 12);
  std::uniform_real_distribution<double> kdist(0.01, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = static_cast<std::size_t>(size(rng));
    const LossVector l(oracle::random_losses(rng, n));
    std::vector<bool> bits(n);
    std::bernoulli_distribution coin(0.5);
    for (std::size_t i = 0; i < n; ++i) bits[i] = coin(rng);
    bits[0] = true;
    const GroupMask mask(bits);
    const double k1 = kdist(rng), k2 = kdist(rng);
    const double d1 = weighted_discrepancy(l, mask, Weighting::power_k(std::min(k1, k2)));
    const double d2 = weighted_discrepancy(l, mask, Weighting::power_k(std::max(k1, k2)));
    CHECK(d1 >= 0.0);
    CHECK(d1 <= l.loss_bound());
    CHECK(d2 <= d1 + 1e-15);  // monotone nonincreasing in k

    const auto comp = mask.complement();
    if (!comp.empty_group()) {
      // Ê[g](Ê[ℓ|g]−Ê[ℓ]) = −Ê[1−g](Ê[ℓ|1−g]−Ê[ℓ])
      CHECK(std::abs(signed_mass_discrepancy(l, mask) + signed_mass_discrepancy(l, comp)) <= 1e-12);
    }
  }
}

TEST_CASE("group mask helpers") {
  const std::vector<std::size_t> idx = {0, 3};
  const auto m = GroupMask::from_indices(5, idx);
  CHECK(m.count() == 2);
  CHECK(m.indices() == idx);
  CHECK(m.complement().count() == 3);
  CHECK(GroupMask::full(3).count() == 3);
  CHECK_THROWS_AS(GroupMask::from_indices(2, std::vector<std::size_t>{5}), InvalidArgument);
}

TEST_CASE("sensitive keys assign cells in first-appearance order") {
  const auto keys = SensitiveKeyVector::from_strings({"b", "a", "b", "c"});
  CHECK(keys.cell_count() == 3);
  CHECK(keys.cell(0) == 0);
  CHECK(keys.cell(1) == 1);
  CHECK(keys.cell(2) == 0);
  CHECK(keys.key(3) == SensitiveKeyVector::Key{"c"});
  const auto masks = keys.cell_masks();
  REQUIRE(masks.size() == 3);
  CHECK(masks[0] == GroupMask{true, false, true, false});
  const std::vector<std::size_t> rows = {1, 3};
  CHECK(keys.subset(rows).cell_count() == 2);
}

TEST_CASE("labels must be binary") {
  CHECK_THROWS_AS(LabelVector({0, 2}), InvalidArgument);
  CHECK(LabelVector({0, 1, 1}).count(1) == 2);
}

TEST_CASE("compensated sum survives cancellation") {
  std::vector<double> xs = {1e16, 1.0, -1e16, 1.0};
  CHECK(compensated_sum(xs) == 2.0);
}
