// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "mwld/audit.hpp"
#include "mwld/cli.hpp"
#include "mwld/data.hpp"
#include "mwld/estimator.hpp"
#include "mwld/random.hpp"
#include "mwld/trainer.hpp"
#include "mwld/variance.hpp"

using namespace mwld;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

const std::string kSource = MWLD_SOURCE_DIR;

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<double> random_losses(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> style(0, 3);
  std::vector<double> v(n);
  switch (style(rng)) {
    case 0:
      for (auto& x : v) x = u(rng);
      break;
    case 1:  // heavy ties
      for (auto& x : v) x = std::floor(u(rng) * 4.0) / 4.0;
      break;
    case 2:
      for (auto& x : v) x = u(rng) < 0.3 ? 1.0 : 0.0;
      break;
    default:
      for (auto& x : v) x = std::pow(u(rng), 6.0);
  }
  return v;
}

Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> size(1, 12);
  double worst = 0.0;
  int vectors = 0;
  for (; vectors < 1200; ++vectors) {
    const LossVector l(random_losses(rng, static_cast<std::size_t>(size(rng))));
    for (double k : {0.1, 0.3, 0.5, 1.0})
      worst = std::max(worst, std::abs(empirical_mwld(l, k).value -
                                       brute_force_mwld(l, Weighting::power_k(k)).value));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && secs < 30.0,
          fmt("%d vectors, max |scan - brute| = %.3g, %.2f s", vectors, worst, secs)};
}

double best_time(const LossVector& l) {
  double best = 1e30;
  for (int rep = 0; rep < 5; ++rep) {
    const auto t0 = Clock::now();
    volatile double v = empirical_mwld(l, 0.5).value;
    (void)v;
    best = std::min(best, seconds_since(t0));
  }
  return best;
}

Outcome scaling() {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> big(1000000);
  for (auto& x : big) x = u(rng);
  const std::vector<double> small(big.begin(), big.begin() + 100000);
  const double t_small = best_time(LossVector(small));
  const double t_big = best_time(LossVector(big));
  const double ratio = t_big / t_small;
  return {t_big < 1.0 && ratio < 15.0,
          fmt("n=1e5 %.4f s, n=1e6 %.4f s, ratio %.2f", t_small, t_big, ratio)};
}

Outcome sandwich_criterion() {
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> size(1, 14);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int failures = 0;
  int checked = 0;
  for (int trial = 0; trial < 1200; ++trial) {
    const LossVector l(random_losses(rng, static_cast<std::size_t>(size(rng))));
    const double gamma = brute_force_mwld(l, Weighting::power_k(0.5)).value;
    const double sd = std::sqrt(loss_variance(l));
    if (gamma > sd + 1e-9) ++failures;
    if (gamma <= 1.0 && sd > sandwich_envelope(gamma) + 1e-9) ++failures;
    ++checked;
  }
  // General-L form at a declared bound L.
  const double L = kLogLossBound;
  for (int trial = 0; trial < 400; ++trial) {
    auto v = random_losses(rng, static_cast<std::size_t>(size(rng)));
    for (auto& x : v) x *= L * u(rng);
    const LossVector l(v, L);
    const double gamma = empirical_mwld(l, 0.5).value;
    if (gamma > 0.0 && loss_variance(l) > variance_upper_bound_general_L(gamma, L) + 1e-9) ++failures;
    ++checked;
  }
  return {failures == 0, fmt("%d vectors, %d violations", checked, failures)};
}

Outcome shift_certificate() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  double worst = 1e30;
  std::size_t masks = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const LossVector l(random_losses(rng, 3 + trial % 60));
    const auto s = shift_check(l, u(rng), 100, derive_seed(404, trial));
    masks += s.evaluated;
    worst = std::min(worst, s.min_margin);
  }
  const double secs = seconds_since(t0);
  return {masks >= 10000 && worst >= -1e-9,
          fmt("%zu masks, min margin %.3g, %.2f s", masks, worst, secs)};
}

Outcome convergence() {
  const auto t0 = Clock::now();
  const std::vector<LossAtom> atoms = {{0.0, 0.05}, {0.1, 0.15}, {0.25, 0.2}, {0.4, 0.1},
                                       {0.55, 0.1}, {0.7, 0.15}, {0.85, 0.15}, {1.0, 0.1}};
  bool ok = true;
  std::string detail;
  for (double k : {0.5, 1.0}) {
    double prev_median = 1e30;
    for (std::size_t n : {1000u, 10000u, 100000u}) {
      const auto s = convergence_study(atoms, n, k, 0.2, 200, derive_seed(505, n));
      const double freq = static_cast<double>(s.exceed_count) / 200.0;
      ok = ok && freq <= 0.2 && s.median_deviation < prev_median;
      prev_median = s.median_deviation;
      detail += fmt("k=%.1f n=%zu exceed %.3f median %.4g; ", k, n, freq, s.median_deviation);
    }
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 120.0;
  return {ok, detail + fmt("%.1f s", secs)};
}

Outcome deviation_bounds() {
  const double delta = 0.02;
  const std::size_t n = 2000, trials = 500, T = 4;
  const std::vector<double> cell_p = {0.1, 0.2, 0.3, 0.4};
  const std::vector<double> loss_p = {0.2, 0.4, 0.5, 0.7};
  double mean = 0.0;
  for (std::size_t c = 0; c < T; ++c) mean += cell_p[c] * loss_p[c];
  const double var = mean * (1.0 - mean);
  double clv = 0.0;
  for (std::size_t c = 0; c < T; ++c) clv += cell_p[c] * (loss_p[c] - mean) * (loss_p[c] - mean);

  const double maurer = maurer_deviation(n, delta);
  const double coarse = coarse_deviation(n, delta, T);
  std::vector<int> maurer_hit(trials), coarse_hit(trials);
  parallel_for(trials, [&](std::size_t t) {
    std::mt19937_64 rng(derive_seed(606, t));
    std::discrete_distribution<int> cell(cell_p.begin(), cell_p.end());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(n);
    std::vector<std::string> keys(n);
    for (std::size_t i = 0; i < n; ++i) {
      const int c = cell(rng);
      keys[i] = std::to_string(c);
      v[i] = u(rng) < loss_p[c] ? 1.0 : 0.0;
    }
    const LossVector l(v);
    maurer_hit[t] = std::abs(std::sqrt(unbiased_loss_variance(l)) - std::sqrt(var)) > maurer;
    coarse_hit[t] = std::abs(coarse_loss_variance(l, SensitiveKeyVector::from_strings(keys)) - clv) > coarse;
  });
  const double fm = std::accumulate(maurer_hit.begin(), maurer_hit.end(), 0) / double(trials);
  const double fc = std::accumulate(coarse_hit.begin(), coarse_hit.end(), 0) / double(trials);
  return {fm <= delta && fc <= (T + 3) * delta,
          fmt("Maurer violations %.3f (<= %.2f), coarse violations %.3f (<= %.2f)", fm, delta, fc,
              (T + 3) * delta)};
}

Outcome gradients() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(707);
  std::normal_distribution<double> z(0.0, 0.7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  int configs = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 30, d = 1 + trial % 5;
    TabularDataset ds;
    ds.rows = n;
    ds.cols = d;
    ds.features.resize(n * d);
    for (auto& v : ds.features) v = z(rng);
    std::vector<int> y(n);
    std::vector<std::string> keys(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = u(rng) < 0.5;
      keys[i] = std::to_string(static_cast<int>(u(rng) * 3));
    }
    y[0] = 0;
    y[1] = 1;
    ds.labels = LabelVector(y);
    ds.keys = SensitiveKeyVector::from_strings(keys);
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    std::vector<double> w(d + 1);
    for (auto& v : w) v = z(rng);
    for (Objective o : {Objective::LR, Objective::LV, Objective::CLV}) {
      TrainConfig c;
      c.objective = o;
      c.eta = 0.1 * u(rng);
      c.lambda = 3.0 * u(rng);
      const auto g = objective_gradient(LinearModel(w), ds, rows, c);
      for (std::size_t j = 0; j <= d; ++j) {
        const double h = 1e-5;
        auto wp = w, wm = w;
        wp[j] += h;
        wm[j] -= h;
        const double fd = (objective_value(LinearModel(wp), ds, rows, c) -
                           objective_value(LinearModel(wm), ds, rows, c)) / (2 * h);
        worst = std::max(worst, std::abs(g[j] - fd) / std::max(1e-4, std::abs(g[j])));
      }
    }
    ++configs;
  }
  return {worst <= 1e-5,
          fmt("%d configs x 3 objectives, max rel err %.3g, %.2f s", configs, worst, seconds_since(t0))};
}

Outcome tradeoff_direction() {
  const std::size_t seeds = 5;
  const auto lv = kLambdaGrid;
  const auto clv = clv_lambda_grid();
  std::vector<SweepSection> runs(seeds);
  for (std::size_t s = 0; s < seeds; ++s) {
    auto [train, test] = split_train_test(synth_two_group(5000, 0.2, 0.3, 800 + s), 0.3, 800 + s);
    TrainConfig c;
    c.seed = derive_seed(808, s);
    runs[s] = tradeoff_report(train, test, c, lv, clv);
  }
  const std::size_t rows = runs[0].rows.size();
  std::vector<double> loss(rows, 0.0), clv_lv(rows, 0.0), clv_clv(rows, 0.0);
  for (const auto& r : runs)
    for (std::size_t i = 0; i < rows; ++i) {
      loss[i] += r.rows[i].test_loss / seeds;
      clv_lv[i] += r.rows[i].conditional_lv / seeds;
      clv_clv[i] += r.rows[i].conditional_clv / seeds;
    }
  // Reports the qualifying point with the smallest loss increase, or the
  // lowest-variance point when none qualifies.
  auto search = [&](std::size_t first, std::size_t count, const std::vector<double>& metric,
                    double& best_ratio, double& loss_increase) {
    bool found = false;
    best_ratio = 1e30;
    for (std::size_t i = first; i < first + count; ++i) {
      const double ratio = metric[i] / metric[first];
      const double inc = loss[i] / loss[first] - 1.0;
      if (ratio <= 0.5 && inc <= 0.15 && (!found || inc < loss_increase)) {
        found = true;
        best_ratio = ratio;
        loss_increase = inc;
      }
    }
    if (!found) {
      for (std::size_t i = first; i < first + count; ++i)
        if (metric[i] / metric[first] < best_ratio) {
          best_ratio = metric[i] / metric[first];
          loss_increase = loss[i] / loss[first] - 1.0;
        }
    }
    return found;
  };
  double r1 = 0, i1 = 0, r2 = 0, i2 = 0;
  const bool a = search(0, lv.size(), clv_lv, r1, i1);
  const bool b = search(lv.size(), clv.size(), clv_clv, r2, i2);
  return {a && b, fmt("LV: variance ratio %.3f at loss %+.1f%%; CLV: coarse ratio %.3f at loss %+.1f%%",
                      r1, 100 * i1, r2, 100 * i2)};
}

Outcome generalization_gap() {
  const std::size_t seeds = 10;
  const std::vector<double> ks = {0.1, 1.0};
  std::vector<KSweepSection> runs(seeds);
  parallel_for(seeds, [&](std::size_t s) {
    auto [train, test] = split_train_test(synth_two_group(5000, 0.2, 0.3, 900 + s), 0.3, 900 + s);
    TrainConfig c;
    c.seed = derive_seed(909, s);
    const auto fitted = fit(train, c);
    runs[s] = k_sweep(fitted.model, train, test, ks);
  });
  double g01 = 0.0, g1 = 0.0;
  for (const auto& r : runs) {
    g01 += r.rows[0].gap / seeds;
    g1 += r.rows[1].gap / seeds;
  }
  return {g01 > g1, fmt("mean gap k=0.1 %.4g, k=1.0 %.4g", g01, g1)};
}

Outcome envelope() {
  std::mt19937_64 rng(1010);
  std::uniform_int_distribution<int> size(2, 400);
  const std::vector<double> ks = {0.1, 0.5, 1.0};
  double worst = -1e30;
  for (int trial = 0; trial < 100; ++trial) {
    const LossVector l(random_losses(rng, static_cast<std::size_t>(size(rng))));
    std::vector<std::size_t> sizes(l.size());
    std::iota(sizes.begin(), sizes.end(), std::size_t{1});
    const auto s = size_profile(l, sizes, ks);
    for (const auto& r : s.rows)
      for (double e : r.envelopes) worst = std::max(worst, r.profile - e);
  }
  return {worst <= 1e-9, fmt("100 vectors, max profile - envelope = %.3g", worst)};
}

Outcome total_variance() {
  std::mt19937_64 rng(1111);
  std::uniform_int_distribution<int> size(2, 200);
  std::uniform_int_distribution<int> cells(1, 8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = -1e30;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto v = random_losses(rng, static_cast<std::size_t>(size(rng)));
    const LossVector l(v);
    const int t = cells(rng);
    std::vector<std::string> keys(v.size());
    std::vector<bool> bits(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      keys[i] = std::to_string(static_cast<int>(u(rng) * t));
      bits[i] = u(rng) < 0.5;
    }
    bits[0] = true;
    const double var = loss_variance(l);
    worst = std::max(worst, coarse_loss_variance(l, SensitiveKeyVector::from_strings(keys)) - var);
    const GroupMask m(bits);
    const double d = group_mean(l, m) - l.mean();
    worst = std::max(worst, group_fraction(l, m) * d * d - var);
  }
  return {worst <= 1e-12, fmt("1000 inputs, max excess over Var = %.3g", worst)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const auto dir = fs::temp_directory_path() / ("mwld_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  std::ostringstream sink;
  auto run = [&](std::vector<std::string> args) { return cli::run(args, sink, sink); };
  const auto data = (dir / "synth" / "data.csv").string();
  const auto schema = (dir / "synth" / "schema.json").string();
  bool ok = run({"synth", "--seed", "1", "--n", "2000", "--out", (dir / "synth").string()}) == 0;
  std::vector<std::string> compared;
  for (int rep = 0; rep < 2 && ok; ++rep) {
    const auto r = dir / ("run" + std::to_string(rep));
    ok = ok &&
         run({"train", "--seed", "2", "--data", data, "--schema", schema, "--objective", "clv",
              "--lambda", "0.4", "--out", (r / "train").string()}) == 0 &&
         run({"audit", "--seed", "3", "--data", data, "--schema", schema, "--model",
              (dir / "run0" / "train" / "weights.json").string(), "--out", (r / "audit").string()}) == 0 &&
         run({"sweep", "--seed", "4", "--data", data, "--schema", schema, "--lambdas", "0,0.4,1",
              "--epochs", "10", "--repeats", "2", "--out", (r / "sweep").string()}) == 0;
  }
  std::size_t files = 0, identical = 0;
  if (ok) {
    for (const auto& entry : fs::recursive_directory_iterator(dir / "run0")) {
      if (!entry.is_regular_file()) continue;
      const auto rel = fs::relative(entry.path(), dir / "run0");
      ++files;
      identical += slurp(entry.path()) == slurp(dir / "run1" / rel);
    }
  }
  fs::remove_all(dir);
  return {ok && files > 0 && files == identical,
          fmt("%zu output files, %zu byte-identical across repeated runs", files, identical)};
}

Outcome ingestion() {
  struct Case {
    const char* name;
    std::size_t settings;
  };
  bool ok = true;
  std::string detail;
  const auto dir = fs::temp_directory_path() / ("mwld_acceptance_io_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  for (const Case c : {Case{"candc", 16}, Case{"income", 30}, Case{"german", 6}, Case{"compas5", 30}}) {
    const auto schema = DatasetSchema::load(kSource + "/schemas/" + c.name + ".json");
    const auto ds = load_csv(kSource + "/tests/fixtures/" + c.name + "_200.csv", schema);
    const auto p = (dir / (std::string(c.name) + ".csv")).string();
    write_dataset_csv(ds, p);
    const auto back = load_csv(p, schema, &ds.manifest);
    bool same = back.rows == ds.rows && back.features == ds.features && back.manifest == ds.manifest;
    for (std::size_t i = 0; same && i < ds.rows; ++i)
      same = back.labels[i] == ds.labels[i] && back.keys.key(i) == ds.keys.key(i);
    const bool good = ds.settings() == c.settings && schema.predicted_settings() == c.settings && same;
    ok = ok && good;
    detail += fmt("%s T=%zu%s; ", c.name, ds.settings(), same ? " round-trip ok" : " round-trip FAILED");
  }
  fs::remove_all(dir);
  return {ok, detail};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria = {
      {"oracle equivalence", oracle_equivalence},
      {"n log n scaling", scaling},
      {"variance sandwich", sandwich_criterion},
      {"shift certificate", shift_certificate},
      {"convergence rates", convergence},
      {"deviation bounds", deviation_bounds},
      {"gradient correctness", gradients},
      {"variance-loss tradeoff", tradeoff_direction},
      {"generalization gap by k", generalization_gap},
      {"size profile envelope", envelope},
      {"law of total variance", total_variance},
      {"determinism", determinism},
      {"ingestion", ingestion},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s [%zu] %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
