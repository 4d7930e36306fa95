// Python bindings. Structured inputs and outputs cross as JSON text; the
// package __init__ turns them into dicts.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "singular_drift/drifts.hpp"
#include "singular_drift/errors.hpp"
#include "singular_drift/kolmogorov.hpp"
#include "singular_drift/lab.hpp"
#include "singular_drift/sde.hpp"
#include "singular_drift/snapshot.hpp"
#include "singular_drift/statistics.hpp"

namespace py = pybind11;
namespace sd = singular_drift;
using nlohmann::json;

namespace {

json parse(const std::string& text) { return text.empty() ? json::object() : json::parse(text); }

py::array_t<double> node_values(const sd::TimeField& f) {
  const auto n = static_cast<py::ssize_t>(f.grid().size());
  py::array_t<double> out({static_cast<py::ssize_t>(f.size()), static_cast<py::ssize_t>(f.components()), n});
  auto view = out.mutable_unchecked<3>();
  for (int m = 0; m < f.size(); ++m)
    for (int c = 0; c < f.components(); ++c) {
      const auto vals = f[m].values(c);
      for (py::ssize_t i = 0; i < n; ++i) view(m, c, i) = vals[static_cast<std::size_t>(i)];
    }
  return out;
}

py::array_t<double> ensemble_array(const sd::PathEnsemble& e) {
  py::array_t<double> out({static_cast<py::ssize_t>(e.paths), static_cast<py::ssize_t>(e.steps + 1), static_cast<py::ssize_t>(e.dim)});
  std::copy(e.states.begin(), e.states.end(), out.mutable_data());
  return out;
}

std::vector<double> to_vector(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  return {a.data(), a.data() + a.size()};
}

sd::SimConfig sim_config(const std::string& text, int dim) {
  json j = parse(text);
  if (!j.contains("dim")) j["dim"] = dim;
  return j.get<sd::SimConfig>();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spectral solver and Monte Carlo lab for SDEs with distributional drift";

  py::register_exception<sd::Error>(m, "Error", PyExc_RuntimeError);

  py::class_<sd::TimeField>(m, "TimeField")
      .def_property_readonly("nodes", &sd::TimeField::size)
      .def_property_readonly("components", &sd::TimeField::components)
      .def_property_readonly("dim", [](const sd::TimeField& f) { return f.grid().dim(); })
      .def_property_readonly("modes", [](const sd::TimeField& f) { return f.grid().modes(); })
      .def_property_readonly("horizon", [](const sd::TimeField& f) { return f.time().horizon(); })
      .def("values", &node_values, "Grid values, shape (nodes, components, N^d)")
      .def("save", [](const sd::TimeField& f, const std::string& path, const std::string& description) {
        sd::snapshot::write_time_field(path, f, description);
      }, py::arg("path"), py::arg("description") = "field")
      .def_static("load", [](const std::string& path) { return sd::snapshot::read_time_field(path); });

  m.def("generate_drift", [](const std::string& spec, int dim, int modes, int steps, double horizon) {
    const auto s = parse(spec).get<sd::DriftSpec>();
    return sd::generate(s, sd::GridSpec(dim, modes), sd::TimeGrid(horizon, steps));
  }, py::arg("spec"), py::arg("dim") = 1, py::arg("modes") = 256, py::arg("steps") = 128, py::arg("horizon") = 1.0);

  m.def("assumption_check", [](const sd::TimeField& b, double beta, double q) {
    return json(sd::assumption_check(b, beta, q)).dump();
  });

  m.def("solve_pde", [](const sd::TimeField& b, double lambda, const std::string& cfg) {
    const auto c = parse(cfg).get<sd::PdeConfig>();
    py::gil_scoped_release release;
    auto sol = sd::solve_fwd(b, lambda, c);
    return std::make_pair(std::move(sol.v), json(sol.report).dump());
  }, py::arg("b"), py::arg("lam"), py::arg("config") = "");

  m.def("calibrate", [](const sd::TimeField& b, const std::string& cfg, double target) {
    const auto c = parse(cfg).get<sd::PdeConfig>();
    sd::Calibration cal;
    {
      py::gil_scoped_release release;
      cal = sd::calibrate_lambda(b, c, target);
    }
    return py::make_tuple(cal.lambda, cal.trace, std::move(cal.solution.v));
  }, py::arg("b"), py::arg("config") = "", py::arg("target") = 0.5);

  m.def("to_backward", &sd::to_backward);
  m.def("gradient_sup", &sd::gradient_sup);
  m.def("value_sup", &sd::value_sup);

  m.def("simulate_virtual", [](const sd::TimeField& u, const std::string& sim) {
    const auto cfg = sim_config(sim, u.grid().dim());
    sd::PathEnsemble x;
    {
      py::gil_scoped_release release;
      const sd::TransformContext ctx(u);
      sd::simulate_y(ctx, cfg, &x);
    }
    return ensemble_array(x);
  }, py::arg("u"), py::arg("sim"), "Virtual solution X = psi(t, Y); u must be the backward solution");

  m.def("simulate_classical", [](const sd::TimeField& b, const std::string& sim) {
    const auto cfg = sim_config(sim, b.grid().dim());
    sd::PathEnsemble x;
    {
      py::gil_scoped_release release;
      x = sd::simulate_classical(b, cfg);
    }
    return ensemble_array(x);
  });

  m.def("wasserstein1", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
                           const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
    return sd::wasserstein1(to_vector(a), to_vector(b));
  });
  m.def("ks_stat", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
                      const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
    return sd::ks_stat(to_vector(a), to_vector(b));
  });
  m.def("kendall_trend", [](const std::vector<double>& y) {
    const auto r = sd::kendall_trend(y);
    return py::make_tuple(r.tau, r.p_decreasing, r.exact);
  });

  m.def("gamma_integral", &sd::gamma_integral);
  m.def("gamma_bound_check", &sd::gamma_bound_check);

  m.def("run_study", [](const std::string& kind, const std::string& config, const std::string& out_root) {
    const auto cfg = parse(config).get<sd::lab::ExperimentConfig>();
    sd::lab::StudyReport report;
    {
      py::gil_scoped_release release;
      if (kind == "mollify") report = sd::lab::study_mollify(cfg);
      else if (kind == "lambda") report = sd::lab::study_lambda(cfg);
      else if (kind == "consistency") report = sd::lab::study_smooth_consistency(cfg);
      else if (kind == "diagnostics") report = sd::lab::diagnostics(cfg);
      else throw sd::InvalidSpec("unknown study '" + kind + "'");
    }
    json out = report.to_json();
    if (!out_root.empty()) out["results_dir"] = sd::lab::write_results(report, cfg, out_root).string();
    return out.dump();
  }, py::arg("kind"), py::arg("config"), py::arg("out_root") = "");
}
