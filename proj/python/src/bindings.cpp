#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "jlct/error.hpp"
#include "jlct/pipeline.hpp"
#include "jlct/serialize.hpp"
#include "jlct/simgen.hpp"

namespace py = pybind11;
using namespace jlct;

namespace {

VariableRoles roles_of(const std::string& roles_json) {
  return roles_json.empty() ? simulation_roles() : roles_from_json(nlohmann::json::parse(roles_json));
}

LongDataset parse_data(const std::string& csv, const VariableRoles& roles) {
  std::istringstream in(csv);
  return read_csv(in, roles);
}

struct PyModel {
  JlctModel model;

  std::size_t n_leaves() const { return model.tree.n_leaves(); }
  std::string to_json() const { return model_to_json(model).dump(2); }
  std::string text() const { return render_text(model.tree); }

  /// Per-record leaves and outcome predictions, plus each subject's survival
  /// evaluated on `times`.
  py::dict predict(const std::string& csv, const std::vector<double>& times, bool in_sample) const {
    const auto data = parse_data(csv, model.input_roles);
    double horizon = max_observed_time(data);
    for (double t : times) horizon = std::max(horizon, t);
    const auto p = predict_model(model, data, horizon, in_sample);
    std::vector<std::vector<double>> surv;
    for (const auto& c : p.survival) {
      std::vector<double> row;
      for (double t : times) row.push_back(c(t));
      surv.push_back(std::move(row));
    }
    py::dict out;
    out["leaves"] = p.leaves;
    out["outcome"] = p.outcome;
    out["survival"] = surv;
    return out;
  }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Joint latent class trees for longitudinal and time-to-event data";

  py::register_exception<Error>(m, "JlctError");

  m.def(
      "simulate",
      [](const std::string& structure, double p0, const std::string& hazard, const std::string& censoring,
         std::size_t n, std::uint64_t seed, bool time_varying) {
        SimConfig c;
        c.structure = parse_structure(structure);
        c.p0 = p0;
        c.hazard = parse_hazard(hazard);
        c.censoring = parse_censoring(censoring);
        c.n_subjects = n;
        c.seed = seed;
        c.time_varying = time_varying;
        const auto sim = simulate(c);
        std::ostringstream csv;
        write_csv(csv, sim.data, simulation_roles());
        return py::make_tuple(csv.str(), truth_to_json(sim.truth).dump());
      },
      py::arg("structure") = "tree", py::arg("p0") = 1.0, py::arg("hazard") = "weibull-i",
      py::arg("censoring") = "light", py::arg("n") = 500, py::arg("seed") = 1, py::arg("time_varying") = true,
      "Simulated dataset as (csv text, truth json text).");

  m.def("default_roles", [] { return roles_to_json(simulation_roles()).dump(); },
        "Roles JSON used for simulated data.");

  py::class_<PyModel>(m, "Model")
      .def_property_readonly("n_leaves", &PyModel::n_leaves)
      .def("to_json", &PyModel::to_json)
      .def("__str__", &PyModel::text)
      .def("predict", &PyModel::predict, py::arg("csv"), py::arg("times") = std::vector<double>{},
           py::arg("in_sample") = false)
      .def_static("from_json", [](const std::string& s) { return PyModel{model_from_json(nlohmann::json::parse(s))}; });

  m.def(
      "fit",
      [](const std::string& csv, const std::string& roles_json, const std::string& variant, double stop,
         std::size_t max_leaves, int min_events, double variance_bound, bool shared_baseline, int threads) {
        const auto roles = roles_of(roles_json);
        FitOptions options;
        options.variant = parse_variant(variant);
        options.controls.stop_threshold = stop;
        options.controls.max_terminal_nodes = max_leaves;
        options.controls.min_events = min_events;
        options.controls.variance_bound = variance_bound;
        options.controls.threads = threads;
        options.shared_baseline = shared_baseline;
        py::gil_scoped_release release;
        return PyModel{fit_model(parse_data(csv, roles), roles, options)};
      },
      py::arg("csv"), py::arg("roles") = "", py::arg("variant") = "jlct4", py::arg("stop") = 3.84,
      py::arg("max_leaves") = 6, py::arg("min_events") = 0, py::arg("variance_bound") = 1e5,
      py::arg("shared_baseline") = false, py::arg("threads") = 1,
      "Fits a tree. An empty roles string means the simulation roles.");
}
