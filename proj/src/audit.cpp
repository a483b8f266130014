#include "mwld/audit.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

#include "mwld/random.hpp"

namespace mwld {

namespace {

using nlohmann::json;

void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidArgument(message);
}

void check_ks(std::span<const double> ks) {
  require(!ks.empty(), "at least one k is required");
  for (double k : ks) validate_power_k(k);
}

LossVector losses_of_label(const LossVector& losses, const LabelVector& labels, int label) {
  std::vector<double> v;
  for (std::size_t i = 0; i < losses.size(); ++i)
    if (labels[i] == label) v.push_back(losses[i]);
  return LossVector(std::move(v), losses.loss_bound());
}

}  // namespace

// ---------------------------------------------------------------- sections

KSweepSection k_sweep(const LossVector& train, const LossVector& test, std::span<const double> ks) {
  check_ks(ks);
  KSweepSection s;
  s.n_train = train.size();
  s.n_test = test.size();
  for (double k : ks) {
    KSweepRow r;
    r.k = k;
    r.train_mwld = empirical_mwld(train, k).value;
    r.test_mwld = empirical_mwld(test, k).value;
    r.gap = std::abs(r.train_mwld - r.test_mwld);
    s.rows.push_back(r);
  }
  return s;
}

KSweepSection k_sweep(const LinearModel& model, const TabularDataset& train,
                      const TabularDataset& test, std::span<const double> ks) {
  return k_sweep(loss_vector(model, train), loss_vector(model, test), ks);
}

std::vector<std::size_t> default_sizes(std::size_t n, std::size_t count) {
  require(n >= 1, "n must be positive");
  require(count >= 2, "need at least two sizes");
  std::vector<std::size_t> sizes;
  for (std::size_t i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(count - 1);
    sizes.push_back(1 + static_cast<std::size_t>(std::llround(t * static_cast<double>(n - 1))));
  }
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  return sizes;
}

SizeProfileSection size_profile(const LossVector& losses, std::span<const std::size_t> sizes,
                                std::span<const double> ks) {
  check_ks(ks);
  const std::size_t n = losses.size();
  for (std::size_t m : sizes)
    require(m >= 1 && m <= n, "group size " + std::to_string(m) + " outside [1, n]");
  SizeProfileSection s;
  s.n = n;
  s.ks.assign(ks.begin(), ks.end());
  for (double k : ks) s.mwld.push_back(empirical_mwld(losses, k).value);
  const std::vector<double> profile = discrepancy_size_profile(losses);
  for (std::size_t m : sizes) {
    SizeProfileRow r;
    r.m = m;
    r.profile = profile[m - 1];
    const double alpha = static_cast<double>(m) / static_cast<double>(n);
    for (std::size_t j = 0; j < ks.size(); ++j) r.envelopes.push_back(s.mwld[j] / std::pow(alpha, ks[j]));
    s.rows.push_back(std::move(r));
  }
  return s;
}

SizeProfileSection size_profile(const LinearModel& model, const TabularDataset& dataset,
                                std::span<const std::size_t> sizes, std::span<const double> ks) {
  return size_profile(loss_vector(model, dataset), sizes, ks);
}

double shift_margin(const LossVector& losses, const GroupMask& mask, double k, double mwld_value) {
  validate_power_k(k);
  const double w_g = std::pow(group_fraction(losses, mask), k);
  return losses.mean() + mwld_value - shifted_population_loss(losses, mask, std::min(1.0, w_g));
}

ShiftSection shift_check(const LossVector& losses, double k, std::size_t trials,
                         std::uint64_t seed) {
  require(trials >= 1, "trials must be at least 1");
  validate_power_k(k);
  const std::size_t n = losses.size();
  ShiftSection s;
  s.n = n;
  s.k = k;
  s.trials = trials;
  s.mwld = losses.is_uniform() ? empirical_mwld(losses, k).value
                               : brute_force_mwld(losses, Weighting::power_k(k)).value;
  std::vector<double> margins(trials, 0.0);
  std::vector<std::uint8_t> used(trials, 0);
  parallel_for(trials, [&](std::size_t t) {
    std::mt19937_64 rng(derive_seed(seed, t));
    std::bernoulli_distribution coin(0.5);
    std::vector<bool> bits(n);
    for (std::size_t i = 0; i < n; ++i) bits[i] = coin(rng);
    const GroupMask mask(bits);
    const std::size_t c = mask.count();
    if (c == 0 || c == n) return;
    used[t] = 1;
    margins[t] = shift_margin(losses, mask, k, s.mwld);
  });
  bool first = true;
  for (std::size_t t = 0; t < trials; ++t) {
    if (!used[t]) {
      ++s.skipped;
      continue;
    }
    ++s.evaluated;
    s.min_margin = first ? margins[t] : std::min(s.min_margin, margins[t]);
    first = false;
  }
  return s;
}

ShiftSection shift_check(const LinearModel& model, const TabularDataset& dataset, double k,
                         std::size_t trials, std::uint64_t seed) {
  return shift_check(loss_vector(model, dataset), k, trials, seed);
}

VarianceBlock variance_block(const LossVector& losses, const LabelVector& labels,
                             const SensitiveKeyVector& keys) {
  require(losses.is_uniform(), "variance block needs uniformly weighted losses");
  VarianceBlock b;
  b.n = losses.size();
  b.settings = keys.cell_count();
  b.mean_loss = losses.mean();
  b.loss_variance = loss_variance(losses);
  b.conditional_loss_variance = conditional_loss_variance(losses, labels);
  b.coarse_loss_variance = coarse_loss_variance(losses, keys);
  b.conditional_coarse_loss_variance = conditional_coarse_loss_variance(losses, keys, labels);
  b.mwld_half = empirical_mwld(losses, 0.5).value;
  const double L = losses.loss_bound();
  b.general_bound = b.mwld_half > 0.0 ? variance_upper_bound_general_L(b.mwld_half, L) : 0.0;
  b.rescale_factor = L;
  const LossVector unit = losses.rescaled();
  b.sandwich = sandwich(empirical_mwld(unit, 0.5).value, std::sqrt(loss_variance(unit)));
  return b;
}

BoundsBlock bounds_block(std::size_t n, double delta, std::size_t settings,
                         std::span<const double> ks) {
  check_ks(ks);
  BoundsBlock b;
  b.n = n;
  b.delta = delta;
  b.settings = settings;
  b.maurer_radius = maurer_deviation(n, delta);
  b.coarse_radius = coarse_deviation(n, delta, settings);
  if (delta < 0.5 && static_cast<double>(n) >= convergence_min_samples(delta))
    for (double k : ks) b.convergence.push_back(convergence_error_bound(n, delta, k));
  return b;
}

SweepCurveRow evaluate_tradeoff_point(const LinearModel& model, const TabularDataset& test,
                                      Objective objective, double lambda) {
  const LossVector losses = loss_vector(model, test);
  SweepCurveRow r;
  r.objective = objective_name(objective);
  r.lambda = lambda;
  r.test_loss = losses.mean();
  r.conditional_lv = conditional_loss_variance(losses, test.labels);
  r.conditional_clv = conditional_coarse_loss_variance(losses, test.keys, test.labels);
  r.mwld_half_y0 = empirical_mwld(losses_of_label(losses, test.labels, 0), 0.5).value;
  r.mwld_half_y1 = empirical_mwld(losses_of_label(losses, test.labels, 1), 0.5).value;
  ExplicitSet cells{test.keys.cell_masks(), WeightRule::SizePower, 0.5};
  r.explicit_group_mwld = mwld_over_explicit_groups(losses, cells).value;
  return r;
}

SweepSection tradeoff_report(const TabularDataset& train, const TabularDataset& test,
                             const TrainConfig& base, std::span<const double> lv_lambdas,
                             std::span<const double> clv_lambdas) {
  base.validate();
  require(!lv_lambdas.empty() || !clv_lambdas.empty(), "no lambda values given");
  struct Job {
    Objective objective;
    double lambda;
  };
  std::vector<Job> jobs;
  auto add = [&](Objective o, std::span<const double> ls) {
    std::vector<double> sorted(ls.begin(), ls.end());
    std::sort(sorted.begin(), sorted.end());
    for (double l : sorted) {
      require(std::isfinite(l) && l >= 0.0, "lambda values must be finite and nonnegative");
      jobs.push_back({o, l});
    }
  };
  add(Objective::LV, lv_lambdas);
  add(Objective::CLV, clv_lambdas);

  SweepSection s;
  s.n_train = train.rows;
  s.n_test = test.rows;
  s.eta = base.eta;
  s.rows.resize(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t j) {
    TrainConfig c = base;
    c.objective = jobs[j].objective;
    c.lambda = jobs[j].lambda;
    const FitResult fitted = fit(train, c);
    s.rows[j] = evaluate_tradeoff_point(fitted.model, test, jobs[j].objective, jobs[j].lambda);
  });
  return s;
}

// ---------------------------------------------------------------- harnesses

ConvergenceStudy convergence_study(std::span<const LossAtom> atoms, std::size_t n, double k,
                                   double delta, std::size_t trials, std::uint64_t seed,
                                   std::size_t threads) {
  require(trials >= 1, "trials must be at least 1");
  ConvergenceStudy st;
  st.bound = convergence_error_bound(n, delta, k);
  st.population_mwld = brute_force_mwld(atom_population(atoms), Weighting::power_k(k)).value;
  st.deviations.assign(trials, 0.0);
  parallel_for(
      trials,
      [&](std::size_t t) {
        const LossVector sample = synth_discrete_loss_population(atoms, n, derive_seed(seed, t));
        st.deviations[t] = std::abs(empirical_mwld(sample, k).value - st.population_mwld);
      },
      threads);
  const double limit = st.bound.lower_side_bound + st.bound.upper_side_bound;
  st.exceed_count = static_cast<std::size_t>(
      std::count_if(st.deviations.begin(), st.deviations.end(), [&](double d) { return d > limit; }));
  std::vector<double> sorted = st.deviations;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t h = sorted.size() / 2;
  st.median_deviation = sorted.size() % 2 ? sorted[h] : 0.5 * (sorted[h - 1] + sorted[h]);
  return st;
}

// ---------------------------------------------------------------- serialization

std::string config_digest(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

std::string canonical_config(const std::map<std::string, std::string>& config) {
  return json(config).dump();
}

namespace {

json to_json(const ReportMetadata& m) {
  return {{"command", m.command},
          {"seed", m.seed},
          {"config_digest", m.config_digest},
          {"loss_kind", m.loss_kind},
          {"loss_bound", m.loss_bound},
          {"rescaled", m.rescaled},
          {"config", m.config}};
}

json to_json(const KSweepSection& s) {
  json rows = json::array();
  for (const auto& r : s.rows)
    rows.push_back({{"k", r.k}, {"train_mwld", r.train_mwld}, {"test_mwld", r.test_mwld},
                    {"gap", r.gap}});
  return {{"n_train", s.n_train}, {"n_test", s.n_test}, {"rows", rows}};
}

json to_json(const SizeProfileSection& s) {
  json rows = json::array();
  for (const auto& r : s.rows)
    rows.push_back({{"m", r.m}, {"profile", r.profile}, {"envelopes", r.envelopes}});
  return {{"n", s.n}, {"ks", s.ks}, {"mwld", s.mwld}, {"rows", rows}};
}

json to_json(const VarianceSandwich& v) {
  return {{"mwld_half", v.mwld_half},
          {"sqrt_variance", v.sqrt_variance},
          {"upper_envelope", v.upper_envelope}};
}

json to_json(const VarianceBlock& b) {
  return {{"n", b.n},
          {"settings", b.settings},
          {"mean_loss", b.mean_loss},
          {"loss_variance", b.loss_variance},
          {"conditional_loss_variance", b.conditional_loss_variance},
          {"coarse_loss_variance", b.coarse_loss_variance},
          {"conditional_coarse_loss_variance", b.conditional_coarse_loss_variance},
          {"mwld_half", b.mwld_half},
          {"general_bound", b.general_bound},
          {"rescale_factor", b.rescale_factor},
          {"sandwich", to_json(b.sandwich)}};
}

json to_json(const BoundsBlock& b) {
  json conv = json::array();
  for (const auto& c : b.convergence)
    conv.push_back({{"n", c.n}, {"delta", c.delta}, {"k", c.k},
                    {"lower_side_bound", c.lower_side_bound},
                    {"upper_side_bound", c.upper_side_bound}});
  return {{"n", b.n},
          {"delta", b.delta},
          {"settings", b.settings},
          {"convergence", conv},
          {"maurer_radius", b.maurer_radius},
          {"coarse_radius", b.coarse_radius}};
}

json to_json(const SweepSection& s) {
  json rows = json::array();
  for (const auto& r : s.rows)
    rows.push_back({{"objective", r.objective},
                    {"lambda", r.lambda},
                    {"test_loss", r.test_loss},
                    {"conditional_lv", r.conditional_lv},
                    {"conditional_clv", r.conditional_clv},
                    {"mwld_half_y0", r.mwld_half_y0},
                    {"mwld_half_y1", r.mwld_half_y1},
                    {"explicit_group_mwld", r.explicit_group_mwld}});
  return {{"n_train", s.n_train}, {"n_test", s.n_test}, {"eta", s.eta}, {"rows", rows}};
}

json to_json(const ShiftSection& s) {
  return {{"n", s.n},         {"k", s.k},       {"trials", s.trials},
          {"evaluated", s.evaluated}, {"skipped", s.skipped}, {"mwld", s.mwld},
          {"min_margin", s.min_margin}};
}

void check_finite(const json& j, const std::string& where) {
  if (j.is_number_float()) {
    if (!std::isfinite(j.get<double>())) throw InvalidArgument("non-finite value in " + where);
  } else if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) check_finite(it.value(), where + "." + it.key());
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i)
      check_finite(j[i], where + "[" + std::to_string(i) + "]");
  }
}

// Readers. Missing keys surface as DataError through `field`.
const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw DataError(std::string("report is missing field '") + key + "'");
  return *it;
}

double num(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number()) throw DataError(std::string("field '") + key + "' is not a number");
  return v.get<double>();
}

std::size_t count(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    throw DataError(std::string("field '") + key + "' is not a count");
  return v.get<std::size_t>();
}

std::vector<double> nums(const json& j, const char* key) {
  std::vector<double> out;
  for (const auto& v : field(j, key)) {
    if (!v.is_number()) throw DataError(std::string("field '") + key + "' holds a non-number");
    out.push_back(v.get<double>());
  }
  return out;
}

ReportMetadata metadata_from(const json& j) {
  ReportMetadata m;
  m.command = field(j, "command").get<std::string>();
  m.seed = field(j, "seed").get<std::uint64_t>();
  m.config_digest = field(j, "config_digest").get<std::string>();
  m.loss_kind = field(j, "loss_kind").get<std::string>();
  m.loss_bound = num(j, "loss_bound");
  m.rescaled = field(j, "rescaled").get<bool>();
  m.config = field(j, "config").get<std::map<std::string, std::string>>();
  return m;
}

KSweepSection k_sweep_from(const json& j) {
  KSweepSection s;
  s.n_train = count(j, "n_train");
  s.n_test = count(j, "n_test");
  for (const auto& r : field(j, "rows"))
    s.rows.push_back({num(r, "k"), num(r, "train_mwld"), num(r, "test_mwld"), num(r, "gap")});
  return s;
}

SizeProfileSection size_profile_from(const json& j) {
  SizeProfileSection s;
  s.n = count(j, "n");
  s.ks = nums(j, "ks");
  s.mwld = nums(j, "mwld");
  for (const auto& r : field(j, "rows"))
    s.rows.push_back({count(r, "m"), num(r, "profile"), nums(r, "envelopes")});
  return s;
}

VarianceBlock variance_from(const json& j) {
  VarianceBlock b;
  b.n = count(j, "n");
  b.settings = count(j, "settings");
  b.mean_loss = num(j, "mean_loss");
  b.loss_variance = num(j, "loss_variance");
  b.conditional_loss_variance = num(j, "conditional_loss_variance");
  b.coarse_loss_variance = num(j, "coarse_loss_variance");
  b.conditional_coarse_loss_variance = num(j, "conditional_coarse_loss_variance");
  b.mwld_half = num(j, "mwld_half");
  b.general_bound = num(j, "general_bound");
  b.rescale_factor = num(j, "rescale_factor");
  const json& sw = field(j, "sandwich");
  b.sandwich = {num(sw, "mwld_half"), num(sw, "sqrt_variance"), num(sw, "upper_envelope")};
  return b;
}

BoundsBlock bounds_from(const json& j) {
  BoundsBlock b;
  b.n = count(j, "n");
  b.delta = num(j, "delta");
  b.settings = count(j, "settings");
  for (const auto& c : field(j, "convergence"))
    b.convergence.push_back({count(c, "n"), num(c, "delta"), num(c, "k"),
                             num(c, "lower_side_bound"), num(c, "upper_side_bound")});
  b.maurer_radius = num(j, "maurer_radius");
  b.coarse_radius = num(j, "coarse_radius");
  return b;
}

SweepSection sweep_from(const json& j) {
  SweepSection s;
  s.n_train = count(j, "n_train");
  s.n_test = count(j, "n_test");
  s.eta = num(j, "eta");
  for (const auto& r : field(j, "rows"))
    s.rows.push_back({field(r, "objective").get<std::string>(), num(r, "lambda"),
                      num(r, "test_loss"), num(r, "conditional_lv"), num(r, "conditional_clv"),
                      num(r, "mwld_half_y0"), num(r, "mwld_half_y1"),
                      num(r, "explicit_group_mwld")});
  return s;
}

ShiftSection shift_from(const json& j) {
  ShiftSection s;
  s.n = count(j, "n");
  s.k = num(j, "k");
  s.trials = count(j, "trials");
  s.evaluated = count(j, "evaluated");
  s.skipped = count(j, "skipped");
  s.mwld = num(j, "mwld");
  s.min_margin = num(j, "min_margin");
  return s;
}

}  // namespace

std::string dump_report(const AuditReport& report) {
  json sections = json::object();
  if (report.mwld_by_k) sections["mwld_by_k"] = to_json(*report.mwld_by_k);
  if (report.size_profile) sections["size_profile"] = to_json(*report.size_profile);
  if (report.variance_block) sections["variance_block"] = to_json(*report.variance_block);
  if (report.bounds_block) sections["bounds_block"] = to_json(*report.bounds_block);
  if (report.sweep_curves) sections["sweep_curves"] = to_json(*report.sweep_curves);
  if (report.shift_checks) sections["shift_checks"] = to_json(*report.shift_checks);
  json doc = {{"schema_version", report.metadata.schema_version},
              {"metadata", to_json(report.metadata)},
              {"sections", sections}};
  check_finite(doc, "report");
  return doc.dump(2) + "\n";
}

AuditReport parse_report(std::string_view text, std::vector<std::string>* warnings) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
  if (!doc.is_object()) throw DataError("malformed report: top level is not an object");
  try {
    AuditReport r;
    const int version = field(doc, "schema_version").get<int>();
    if (version != kReportSchemaVersion)
      throw DataError("unsupported report schema_version " + std::to_string(version));
    r.metadata = metadata_from(field(doc, "metadata"));
    r.metadata.schema_version = version;
    const json& sections = field(doc, "sections");
    if (!sections.is_object()) throw DataError("malformed report: 'sections' is not an object");
    for (auto it = sections.begin(); it != sections.end(); ++it) {
      const std::string& name = it.key();
      const json& body = it.value();
      if (body.is_null() || (body.is_object() && body.empty())) continue;  // absent
      if (name == "mwld_by_k") r.mwld_by_k = k_sweep_from(body);
      else if (name == "size_profile") r.size_profile = size_profile_from(body);
      else if (name == "variance_block") r.variance_block = variance_from(body);
      else if (name == "bounds_block") r.bounds_block = bounds_from(body);
      else if (name == "sweep_curves") r.sweep_curves = sweep_from(body);
      else if (name == "shift_checks") r.shift_checks = shift_from(body);
      else if (warnings) warnings->push_back("ignoring unknown report section '" + name + "'");
    }
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

void write_report(const AuditReport& report, const std::string& path) {
  const std::string text = dump_report(report);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw DataError("failed writing '" + path + "'");
}

AuditReport read_report(const std::string& path, std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open report '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_report(ss.str(), warnings);
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_curve_csv(const CurveTable& table, const std::string& path) {
  CsvTable out;
  if (!table.labels.empty()) out.header.push_back(table.label_header);
  out.header.insert(out.header.end(), table.header.begin(), table.header.end());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    std::vector<std::string> row;
    if (!table.labels.empty()) row.push_back(table.labels.at(i));
    for (double v : table.rows[i]) row.push_back(format_number(v));
    out.rows.push_back(std::move(row));
  }
  write_csv(out, path);
}

std::map<std::string, CurveTable> curve_tables(const AuditReport& report) {
  std::map<std::string, CurveTable> out;
  if (report.mwld_by_k) {
    CurveTable t;
    t.header = {"k", "train_mwld", "test_mwld", "gap"};
    for (const auto& r : report.mwld_by_k->rows) t.rows.push_back({r.k, r.train_mwld, r.test_mwld, r.gap});
    out["mwld_by_k"] = std::move(t);
  }
  if (report.size_profile) {
    const auto& s = *report.size_profile;
    CurveTable t;
    t.header = {"m", "fraction", "profile"};
    for (double k : s.ks) t.header.push_back("envelope_k=" + format_number(k));
    for (const auto& r : s.rows) {
      std::vector<double> row = {static_cast<double>(r.m),
                                 static_cast<double>(r.m) / static_cast<double>(s.n), r.profile};
      row.insert(row.end(), r.envelopes.begin(), r.envelopes.end());
      t.rows.push_back(std::move(row));
    }
    out["size_profile"] = std::move(t);
  }
  if (report.sweep_curves) {
    CurveTable t;
    t.label_header = "objective";
    t.header = {"lambda",       "test_loss",    "conditional_lv",     "conditional_clv",
                "mwld_half_y0", "mwld_half_y1", "explicit_group_mwld"};
    for (const auto& r : report.sweep_curves->rows) {
      t.labels.push_back(r.objective);
      t.rows.push_back({r.lambda, r.test_loss, r.conditional_lv, r.conditional_clv, r.mwld_half_y0,
                        r.mwld_half_y1, r.explicit_group_mwld});
    }
    out["sweep_curves"] = std::move(t);
  }
  return out;
}

}  // namespace mwld
