#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "mwld/audit.hpp"
#include "mwld/cli.hpp"
#include "mwld/data.hpp"
#include "mwld/estimator.hpp"
#include "mwld/trainer.hpp"
#include "mwld/variance.hpp"

namespace py = pybind11;
using namespace mwld;

namespace {

LossVector make_losses(std::vector<double> values, std::optional<std::vector<double>> probabilities,
                       std::optional<double> bound) {
  if (probabilities) return LossVector(std::move(values), std::move(*probabilities));
  if (bound) return LossVector(std::move(values), *bound);
  return LossVector(std::move(values));
}

py::dict result_dict(const MwldResult& r) {
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < r.argmax_mask.size(); ++i)
    if (r.argmax_mask.contains(i)) members.push_back(i);
  py::dict d;
  d["value"] = r.value;
  d["threshold_index"] = r.threshold_index;
  d["side"] = r.argmax_side == ThresholdSide::BelowThreshold ? "below" : "above";
  d["members"] = members;
  return d;
}

SensitiveKeyVector make_keys(const std::vector<std::string>& keys) {
  return SensitiveKeyVector::from_strings(keys);
}

py::array_t<double> feature_matrix(const TabularDataset& d) {
  py::array_t<double> a({d.rows, d.cols});
  std::copy(d.features.begin(), d.features.end(), a.mutable_data());
  return a;
}

}  // namespace

PYBIND11_MODULE(_mwld, m) {
  m.doc() = "Maximum weighted loss discrepancy: estimators, variance bounds and training";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
  py::register_exception<TrainingDiverged>(m, "TrainingDiverged", PyExc_ArithmeticError);

  m.def(
      "empirical_mwld",
      [](std::vector<double> losses, double k, double bound) {
        return result_dict(empirical_mwld(LossVector(std::move(losses), bound), k));
      },
      py::arg("losses"), py::arg("k"), py::arg("bound") = 1.0);
  m.def(
      "brute_force_mwld",
      [](std::vector<double> losses, double k, std::optional<std::vector<double>> probabilities) {
        return result_dict(brute_force_mwld(make_losses(std::move(losses), std::move(probabilities), {}),
                                            Weighting::power_k(k)));
      },
      py::arg("losses"), py::arg("k"), py::arg("probabilities") = py::none());
  m.def(
      "large_group_mwld",
      [](std::vector<double> losses, double alpha) {
        return large_group_mwld(LossVector(std::move(losses)), alpha);
      },
      py::arg("losses"), py::arg("alpha"));
  m.def(
      "discrepancy_size_profile",
      [](std::vector<double> losses) { return discrepancy_size_profile(LossVector(std::move(losses))); },
      py::arg("losses"));
  m.def(
      "convergence_error_bound",
      [](std::size_t n, double delta, double k) {
        const auto b = convergence_error_bound(n, delta, k);
        return py::make_tuple(b.lower_side_bound, b.upper_side_bound);
      },
      py::arg("n"), py::arg("delta"), py::arg("k"));

  m.def(
      "loss_variance",
      [](std::vector<double> losses, std::optional<std::vector<double>> probabilities) {
        return loss_variance(make_losses(std::move(losses), std::move(probabilities), {}));
      },
      py::arg("losses"), py::arg("probabilities") = py::none());
  m.def(
      "conditional_loss_variance",
      [](std::vector<double> losses, std::vector<int> labels) {
        return conditional_loss_variance(LossVector(std::move(losses)), LabelVector(std::move(labels)));
      },
      py::arg("losses"), py::arg("labels"));
  m.def(
      "coarse_loss_variance",
      [](std::vector<double> losses, const std::vector<std::string>& keys) {
        return coarse_loss_variance(LossVector(std::move(losses)), make_keys(keys));
      },
      py::arg("losses"), py::arg("keys"));
  m.def(
      "conditional_coarse_loss_variance",
      [](std::vector<double> losses, const std::vector<std::string>& keys, std::vector<int> labels) {
        return conditional_coarse_loss_variance(LossVector(std::move(losses)), make_keys(keys),
                                                LabelVector(std::move(labels)));
      },
      py::arg("losses"), py::arg("keys"), py::arg("labels"));
  m.def("sandwich_envelope", &sandwich_envelope, py::arg("x"));
  m.def("variance_upper_bound_general_L", &variance_upper_bound_general_L, py::arg("gamma"), py::arg("L"));
  m.def("maurer_deviation", &maurer_deviation, py::arg("n"), py::arg("delta"));
  m.def("coarse_deviation", &coarse_deviation, py::arg("n"), py::arg("delta"), py::arg("T"));

  py::class_<TabularDataset>(m, "Dataset")
      .def_readonly("rows", &TabularDataset::rows)
      .def_readonly("cols", &TabularDataset::cols)
      .def_property_readonly("features", &feature_matrix)
      .def_property_readonly("labels",
                             [](const TabularDataset& d) {
                               return std::vector<int>(d.labels.labels().begin(), d.labels.labels().end());
                             })
      .def_property_readonly("feature_names", [](const TabularDataset& d) { return d.manifest.feature_names(); })
      .def_property_readonly("settings", &TabularDataset::settings)
      .def("split", [](const TabularDataset& d, double test_fraction, std::uint64_t seed) {
        return split_train_test(d, test_fraction, seed);
      }, py::arg("test_fraction"), py::arg("seed"));

  m.def("synth_two_group", &synth_two_group, py::arg("n"), py::arg("minority_fraction"),
        py::arg("noise_gap"), py::arg("seed"));
  m.def(
      "load_csv",
      [](const std::string& path, const std::string& schema_path) {
        return load_csv(path, DatasetSchema::load(schema_path));
      },
      py::arg("path"), py::arg("schema"));

  py::class_<LinearModel>(m, "LinearModel")
      .def(py::init<std::vector<double>>(), py::arg("weights"))
      .def_property_readonly("weights", [](const LinearModel& mdl) {
        return std::vector<double>(mdl.weights().begin(), mdl.weights().end());
      })
      .def("log_losses", [](const LinearModel& mdl, const TabularDataset& d) { return log_losses(mdl, d); });

  m.def(
      "fit",
      [](const TabularDataset& train, const std::string& objective, double lam, double eta,
         double learning_rate, std::size_t batch_size, std::size_t epochs, std::uint64_t seed) {
        TrainConfig c;
        c.objective = parse_objective(objective);
        c.lambda = lam;
        c.eta = eta;
        c.learning_rate = learning_rate;
        c.batch_size = batch_size;
        c.epochs = epochs;
        c.seed = seed;
        py::gil_scoped_release release;
        return fit(train, c).model;
      },
      py::arg("train"), py::arg("objective") = "lr", py::arg("lam") = 0.0, py::arg("eta") = 1e-3,
      py::arg("learning_rate") = 0.1, py::arg("batch_size") = 128, py::arg("epochs") = 40,
      py::arg("seed") = 0);

  m.def(
      "k_sweep",
      [](const std::vector<double>& train, const std::vector<double>& test, const std::vector<double>& ks) {
        std::vector<py::tuple> rows;
        for (const auto& r : k_sweep(LossVector(train), LossVector(test), ks).rows)
          rows.push_back(py::make_tuple(r.k, r.train_mwld, r.test_mwld, r.gap));
        return rows;
      },
      py::arg("train"), py::arg("test"), py::arg("ks"));
  m.def(
      "shift_check",
      [](std::vector<double> losses, double k, std::size_t trials, std::uint64_t seed, double bound) {
        const auto s = shift_check(LossVector(std::move(losses), bound), k, trials, seed);
        py::dict d;
        d["evaluated"] = s.evaluated;
        d["skipped"] = s.skipped;
        d["mwld"] = s.mwld;
        d["min_margin"] = s.min_margin;
        return d;
      },
      py::arg("losses"), py::arg("k"), py::arg("trials"), py::arg("seed"), py::arg("bound") = 1.0);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in-process; returns (exit code, stdout, stderr).");
}
