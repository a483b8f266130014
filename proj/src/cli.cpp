#include "mwld/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "mwld/audit.hpp"
#include "mwld/random.hpp"
#include "mwld/trainer.hpp"

namespace mwld::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kInterceptName = "(intercept)";

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

// Shortest round-trip text, for config values.
std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string join(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + shortest(xs[i]);
  return s;
}

// Options shared by the subcommands; only the ones a subcommand registers are used.
struct Options {
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string data;
  std::string schema;
  std::string model;
  std::string input;
  double test_fraction = 0.3;
  std::size_t repeats = 1;
  bool grid = false;

  TrainConfig train;
  std::string objective = "lr";

  std::vector<double> ks = {0.1, 0.5, 1.0};
  std::vector<double> lambdas;
  std::vector<double> clv_lambdas;
  double delta = 0.05;
  double shift_k = 0.5;
  std::size_t shift_trials = 1000;
  std::size_t size_count = 50;

  std::size_t n = 5000;
  double minority_fraction = 0.2;
  double noise_gap = 0.3;
};

void add_seed_and_out(CLI::App* app, Options& o, bool out_required = true) {
  app->add_option("--seed", o.seed, "Master random seed")->required();
  auto* out = app->add_option("--out", o.out_dir, "Output directory");
  if (out_required) out->required();
}

void add_dataset(CLI::App* app, Options& o) {
  app->add_option("--data", o.data, "Input CSV")->required()->check(CLI::ExistingFile);
  app->add_option("--schema", o.schema, "Dataset schema (JSON)")->required()->check(CLI::ExistingFile);
  app->add_option("--test-fraction,--test_fraction", o.test_fraction, "Held-out fraction")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 0.9));
}

void add_train_config(CLI::App* app, Options& o) {
  app->add_option("--objective", o.objective, "lr, lv or clv")
      ->capture_default_str()
      ->check(CLI::IsMember({"lr", "lv", "clv"}, CLI::ignore_case));
  app->add_option("--eta", o.train.eta, "L2 coefficient")->capture_default_str();
  app->add_option("--lambda", o.train.lambda, "Penalty coefficient")->capture_default_str();
  app->add_option("--learning-rate,--learning_rate", o.train.learning_rate, "SGD step size")
      ->capture_default_str();
  app->add_option("--batch-size,--batch_size", o.train.batch_size, "Minibatch size")
      ->capture_default_str();
  app->add_option("--epochs", o.train.epochs, "Passes over the training data")->capture_default_str();
  app->add_flag("!--no-stratify", o.train.stratify_by_label, "Do not stratify batches by label");
  app->add_flag("--grid", o.grid, "Use the standard eta and lambda grids");
}

struct Resolved {
  std::map<std::string, std::string> config;
  std::string digest;
};

Resolved resolve(const std::string& command, std::map<std::string, std::string> config,
                 std::ostream& out) {
  config["command"] = command;
  Resolved r{std::move(config), {}};
  r.digest = config_digest(canonical_config(r.config));
  out << "config_digest " << r.digest << "\n";
  return r;
}

std::map<std::string, std::string> train_config_map(const TrainConfig& c) {
  return {{"objective", objective_name(c.objective)},
          {"eta", shortest(c.eta)},
          {"lambda", shortest(c.lambda)},
          {"learning_rate", shortest(c.learning_rate)},
          {"batch_size", std::to_string(c.batch_size)},
          {"epochs", std::to_string(c.epochs)},
          {"stratify_by_label", c.stratify_by_label ? "true" : "false"}};
}

std::map<std::string, std::string> input_config_map(const Options& o) {
  return {{"data", o.data},
          {"data_digest", config_digest(read_text(o.data))},
          {"schema", o.schema},
          {"schema_digest", config_digest(read_text(o.schema))},
          {"seed", std::to_string(o.seed)},
          {"test_fraction", shortest(o.test_fraction)}};
}

std::pair<TabularDataset, TabularDataset> split_or_all(const TabularDataset& d, double f,
                                                       std::uint64_t seed) {
  if (f <= 0.0) return {d, d};
  return split_train_test(d, f, seed);
}

// η from the grid by validation loss on a further 70/30 split of the training part.
double grid_eta(const TabularDataset& train, const TrainConfig& base, std::uint64_t seed) {
  auto [fit_part, validation] = split_train_test(train, 0.3, derive_seed(seed, 1));
  return select_eta(fit_part, validation, base);
}

void print_warnings(const LoadSummary& s, std::ostream& err) {
  for (const auto& w : s.warnings) err << "warning: " << w << "\n";
}

// ---------------------------------------------------------------- commands

int cmd_synth(const Options& o, std::ostream& out) {
  auto r = resolve("synth",
                   {{"seed", std::to_string(o.seed)},
                    {"n", std::to_string(o.n)},
                    {"minority_fraction", shortest(o.minority_fraction)},
                    {"noise_gap", shortest(o.noise_gap)}},
                   out);
  const TabularDataset d = synth_two_group(o.n, o.minority_fraction, o.noise_gap, o.seed);
  fs::create_directories(o.out_dir);
  const fs::path dir(o.out_dir);
  write_dataset_csv(d, (dir / "data.csv").string());
  write_text(dir / "schema.json", two_group_schema().dump() + "\n");
  out << "wrote " << (dir / "data.csv").string() << "\n";
  out << "wrote " << (dir / "schema.json").string() << "\n";
  return 0;
}

// Bad hyperparameters are usage errors, reported before any data is read.
void check_usage(const TrainConfig& c) {
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw CLI::ValidationError("config", e.what());
  }
}

int cmd_train(Options o, std::ostream& out, std::ostream& err) {
  o.train.objective = parse_objective(o.objective);
  o.train.seed = o.seed;
  check_usage(o.train);
  const DatasetSchema schema = DatasetSchema::load(o.schema);
  const TabularDataset all = load_csv(o.data, schema);
  print_warnings(all.summary, err);
  auto [train, test] = split_or_all(all, o.test_fraction, o.seed);
  if (o.grid) o.train.eta = grid_eta(train, o.train, o.seed);
  o.train.validate();

  auto cfg = input_config_map(o);
  cfg.merge(train_config_map(o.train));
  cfg["grid"] = o.grid ? "true" : "false";
  auto r = resolve("train", cfg, out);

  const bool has_test = o.test_fraction > 0.0;
  const FitResult fitted = fit(train, o.train, has_test ? &test : nullptr);

  WeightsFile w;
  w.feature_names = all.manifest.feature_names();
  w.feature_names.push_back(kInterceptName);
  w.model = fitted.model;
  w.manifest = all.manifest;
  w.config_digest = r.digest;

  fs::create_directories(o.out_dir);
  const fs::path dir(o.out_dir);
  write_text(dir / "weights.json", dump_weights(w));

  CurveTable h;
  h.header = {"epoch", "train_loss", "train_penalty", "test_loss", "test_penalty"};
  for (std::size_t e = 0; e < fitted.history.epochs.size(); ++e) {
    const auto& rec = fitted.history.epochs[e];
    h.rows.push_back({static_cast<double>(e + 1), rec.train_loss, rec.train_penalty, rec.test_loss,
                      rec.test_penalty});
  }
  write_curve_csv(h, (dir / "history.csv").string());
  out << "eta " << shortest(o.train.eta) << "\n";
  out << "wrote " << (dir / "weights.json").string() << "\n";
  out << "wrote " << (dir / "history.csv").string() << "\n";
  return 0;
}

void write_report_files(const AuditReport& report, const fs::path& dir, std::ostream& out) {
  fs::create_directories(dir);
  write_report(report, (dir / "report.json").string());
  out << "wrote " << (dir / "report.json").string() << "\n";
  for (const auto& [name, table] : curve_tables(report)) {
    const fs::path p = dir / (name + ".csv");
    write_curve_csv(table, p.string());
    out << "wrote " << p.string() << "\n";
  }
}

int cmd_audit(const Options& o, std::ostream& out, std::ostream& err) {
  const WeightsFile w = parse_weights(read_text(o.model));
  const DatasetSchema schema = DatasetSchema::load(o.schema);
  const TabularDataset all = load_csv(o.data, schema, &w.manifest);
  print_warnings(all.summary, err);
  if (all.cols != w.model.feature_count())
    throw DataError("model expects " + std::to_string(w.model.feature_count()) +
                    " features but the data encodes " + std::to_string(all.cols));
  auto [train, test] = split_or_all(all, o.test_fraction, o.seed);

  auto cfg = input_config_map(o);
  cfg["model"] = o.model;
  cfg["model_digest"] = w.config_digest;
  cfg["ks"] = join(o.ks);
  cfg["delta"] = shortest(o.delta);
  cfg["shift_k"] = shortest(o.shift_k);
  cfg["shift_trials"] = std::to_string(o.shift_trials);
  cfg["size_count"] = std::to_string(o.size_count);
  auto r = resolve("audit", cfg, out);

  AuditReport report;
  report.metadata.command = "audit";
  report.metadata.seed = o.seed;
  report.metadata.config_digest = r.digest;
  report.metadata.config = r.config;
  report.metadata.loss_kind = "log_loss";
  report.metadata.loss_bound = kLogLossBound;
  report.metadata.rescaled = true;

  const LossVector test_losses = loss_vector(w.model, test);
  report.mwld_by_k = k_sweep(loss_vector(w.model, train), test_losses, o.ks);
  report.size_profile =
      size_profile(test_losses, default_sizes(test_losses.size(), o.size_count), o.ks);
  report.variance_block = variance_block(test_losses, test.labels, test.keys);
  report.bounds_block = bounds_block(test.rows, o.delta, test.settings(), o.ks);
  report.shift_checks = shift_check(test_losses, o.shift_k, o.shift_trials, derive_seed(o.seed, 2));
  write_report_files(report, o.out_dir, out);
  return 0;
}

SweepSection average_sections(const std::vector<SweepSection>& runs) {
  SweepSection s = runs.front();
  const double R = static_cast<double>(runs.size());
  for (std::size_t i = 0; i < s.rows.size(); ++i) {
    SweepCurveRow acc = s.rows[i];
    acc.test_loss = acc.conditional_lv = acc.conditional_clv = 0.0;
    acc.mwld_half_y0 = acc.mwld_half_y1 = acc.explicit_group_mwld = 0.0;
    for (const auto& run : runs) {
      const auto& x = run.rows[i];
      acc.test_loss += x.test_loss / R;
      acc.conditional_lv += x.conditional_lv / R;
      acc.conditional_clv += x.conditional_clv / R;
      acc.mwld_half_y0 += x.mwld_half_y0 / R;
      acc.mwld_half_y1 += x.mwld_half_y1 / R;
      acc.explicit_group_mwld += x.explicit_group_mwld / R;
    }
    s.rows[i] = acc;
  }
  return s;
}

int cmd_sweep(Options o, std::ostream& out, std::ostream& err) {
  if (o.lambdas.empty() && !o.grid)
    throw CLI::ValidationError("sweep", "give --lambdas or --grid");
  if (o.lambdas.empty()) o.lambdas = kLambdaGrid;
  if (o.clv_lambdas.empty()) {
    if (o.grid) {
      o.clv_lambdas = clv_lambda_grid();
    } else {
      for (double l : o.lambdas) o.clv_lambdas.push_back(2.0 * l);
    }
  }
  o.train.seed = o.seed;
  o.train.objective = Objective::LR;
  check_usage(o.train);
  o.train.lambda = 0.0;
  if (o.test_fraction <= 0.0) throw InvalidArgument("sweep needs a held-out split");

  const DatasetSchema schema = DatasetSchema::load(o.schema);
  const TabularDataset all = load_csv(o.data, schema);
  print_warnings(all.summary, err);

  std::vector<SweepSection> runs;
  double eta = o.train.eta;
  for (std::size_t rep = 0; rep < o.repeats; ++rep) {
    const std::uint64_t split_seed = o.repeats == 1 ? o.seed : derive_seed(o.seed, 100 + rep);
    auto [train, test] = split_train_test(all, o.test_fraction, split_seed);
    TrainConfig base = o.train;
    if (o.grid && rep == 0) eta = grid_eta(train, base, o.seed);
    base.eta = eta;
    base.validate();
    runs.push_back(tradeoff_report(train, test, base, o.lambdas, o.clv_lambdas));
  }

  o.train.eta = eta;
  auto cfg = input_config_map(o);
  cfg.merge(train_config_map(o.train));
  cfg.erase("objective");
  cfg.erase("lambda");
  cfg["lambdas"] = join(o.lambdas);
  cfg["clv_lambdas"] = join(o.clv_lambdas);
  cfg["grid"] = o.grid ? "true" : "false";
  cfg["repeats"] = std::to_string(o.repeats);
  auto r = resolve("sweep", cfg, out);

  AuditReport report;
  report.metadata.command = "sweep";
  report.metadata.seed = o.seed;
  report.metadata.config_digest = r.digest;
  report.metadata.config = r.config;
  report.metadata.loss_bound = kLogLossBound;
  report.sweep_curves = average_sections(runs);
  write_report_files(report, o.out_dir, out);
  return 0;
}

int cmd_report(const Options& o, std::ostream& out, std::ostream& err) {
  std::vector<std::string> warnings;
  const AuditReport report = read_report(o.input, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << "\n";
  resolve("report", {{"in", o.input}, {"seed", std::to_string(o.seed)},
                     {"report_digest", report.metadata.config_digest}},
          out);
  out << "command " << report.metadata.command << "\n";
  out << "seed " << report.metadata.seed << "\n";
  auto present = [&](const char* name, bool p) { out << "section " << name << (p ? " present" : " absent") << "\n"; };
  present("mwld_by_k", report.mwld_by_k.has_value());
  present("size_profile", report.size_profile.has_value());
  present("variance_block", report.variance_block.has_value());
  present("bounds_block", report.bounds_block.has_value());
  present("sweep_curves", report.sweep_curves.has_value());
  present("shift_checks", report.shift_checks.has_value());
  if (!o.out_dir.empty()) {
    fs::create_directories(o.out_dir);
    for (const auto& [name, table] : curve_tables(report)) {
      const fs::path p = fs::path(o.out_dir) / (name + ".csv");
      write_curve_csv(table, p.string());
      out << "wrote " << p.string() << "\n";
    }
  }
  return 0;
}

}  // namespace

std::string dump_weights(const WeightsFile& w) {
  json j = {{"schema_version", kSchemaVersion},
            {"feature_names", w.feature_names},
            {"weights", std::vector<double>(w.model.weights().begin(), w.model.weights().end())},
            {"manifest", json::parse(w.manifest.dump())},
            {"config_digest", w.config_digest}};
  return j.dump(2) + "\n";
}

WeightsFile parse_weights(const std::string& text) {
  try {
    const json j = json::parse(text);
    WeightsFile w;
    w.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    w.model = LinearModel(j.at("weights").get<std::vector<double>>());
    w.manifest = FeatureManifest::parse(j.at("manifest").dump());
    w.config_digest = j.value("config_digest", std::string());
    if (w.feature_names.size() != w.model.dimension())
      throw DataError("weights file lists " + std::to_string(w.feature_names.size()) +
                      " names for " + std::to_string(w.model.dimension()) + " weights");
    if (w.manifest.width() != w.model.feature_count())
      throw DataError("weights file manifest width does not match the weights");
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed weights file: ") + e.what());
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Maximum weighted loss discrepancy audits and variance-regularized training", "mwld"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "Write a two-group synthetic dataset and its schema");
  add_seed_and_out(synth, o);
  synth->add_option("--n", o.n, "Rows")->capture_default_str();
  synth->add_option("--minority-fraction,--minority_fraction", o.minority_fraction)
      ->capture_default_str();
  synth->add_option("--noise-gap,--noise_gap", o.noise_gap)->capture_default_str();

  auto* train = app.add_subcommand("train", "Fit a model and write its weights");
  add_seed_and_out(train, o);
  add_dataset(train, o);
  add_train_config(train, o);

  auto* audit = app.add_subcommand("audit", "Audit a trained model on a dataset");
  add_seed_and_out(audit, o);
  add_dataset(audit, o);
  audit->add_option("--model", o.model, "Weights file from `train`")
      ->required()
      ->check(CLI::ExistingFile);
  audit->add_option("--ks", o.ks, "Exponents k in (0, 1]")->delimiter(',')->capture_default_str();
  audit->add_option("--delta", o.delta, "Confidence parameter")->capture_default_str();
  audit->add_option("--shift-k,--shift_k", o.shift_k)->capture_default_str();
  audit->add_option("--shift-trials,--shift_trials", o.shift_trials)->capture_default_str();
  audit->add_option("--sizes", o.size_count, "Number of group sizes in the profile")
      ->capture_default_str();

  auto* sweep = app.add_subcommand("sweep", "LV and CLV lambda sweeps with held-out metrics");
  add_seed_and_out(sweep, o);
  add_dataset(sweep, o);
  add_train_config(sweep, o);
  sweep->add_option("--lambdas", o.lambdas, "LV lambda values")->delimiter(',');
  sweep->add_option("--clv-lambdas,--clv_lambdas", o.clv_lambdas,
                    "CLV lambda values (default: twice --lambdas)")
      ->delimiter(',');
  sweep->add_option("--repeats", o.repeats, "Independent splits to average")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  auto* report = app.add_subcommand("report", "Summarize a report and export its curves");
  add_seed_and_out(report, o, false);
  report->add_option("--in", o.input, "Report file")->required()->check(CLI::ExistingFile);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const CLI::App* target = &app;
    for (auto* s : app.get_subcommands()) target = s;
    out << target->help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const CLI::App* target = &app;
    for (auto* s : app.get_subcommands()) target = s;
    err << target->help();
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(o, out);
    if (train->parsed()) return cmd_train(o, out, err);
    if (audit->parsed()) return cmd_audit(o, out, err);
    if (sweep->parsed()) return cmd_sweep(o, out, err);
    return cmd_report(o, out, err);
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace mwld::cli
