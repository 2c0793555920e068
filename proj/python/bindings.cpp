#include "survcbps/ate.hpp"
#include "survcbps/baselines.hpp"
#include "survcbps/dataset.hpp"
#include "survcbps/el_dual.hpp"
#include "survcbps/errors.hpp"
#include "survcbps/estimating.hpp"
#include "survcbps/km.hpp"
#include "survcbps/pel.hpp"
#include "survcbps/pipeline.hpp"
#include "survcbps/scad.hpp"
#include "survcbps/serialize.hpp"
#include "survcbps/sim.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace survcbps;

namespace {

py::object to_python(const nlohmann::json& j) {
  switch (j.type()) {
    case nlohmann::json::value_t::null:
      return py::none();
    case nlohmann::json::value_t::boolean:
      return py::bool_(j.get<bool>());
    case nlohmann::json::value_t::number_integer:
      return py::int_(j.get<std::int64_t>());
    case nlohmann::json::value_t::number_unsigned:
      return py::int_(j.get<std::uint64_t>());
    case nlohmann::json::value_t::number_float:
      return py::float_(j.get<double>());
    case nlohmann::json::value_t::string:
      return py::str(j.get<std::string>());
    case nlohmann::json::value_t::array: {
      py::list out;
      for (const auto& v : j) out.append(to_python(v));
      return out;
    }
    case nlohmann::json::value_t::object: {
      py::dict out;
      for (const auto& [key, v] : j.items()) out[py::str(key)] = to_python(v);
      return out;
    }
    default:
      throw DataError("unsupported JSON value");
  }
}

nlohmann::json from_python(const py::handle& h) {
  if (h.is_none()) return nullptr;
  if (py::isinstance<py::bool_>(h)) return h.cast<bool>();
  if (py::isinstance<py::int_>(h)) return h.cast<std::int64_t>();
  if (py::isinstance<py::float_>(h)) return h.cast<double>();
  if (py::isinstance<py::str>(h)) return h.cast<std::string>();
  if (py::isinstance<py::dict>(h)) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [key, v] : h.cast<py::dict>()) out[py::str(key).cast<std::string>()] = from_python(v);
    return out;
  }
  if (py::isinstance<py::sequence>(h)) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& v : h.cast<py::sequence>()) out.push_back(from_python(v));
    return out;
  }
  throw DataError("unsupported Python value");
}

Dataset make_dataset(const Eigen::VectorXd& y, const Eigen::VectorXi& delta, const Eigen::VectorXi& d,
                     const Eigen::MatrixXd& x, std::vector<std::string> names) {
  return Dataset(y, delta, d, x, std::move(names));
}

SimConfig config_from(const py::dict& overrides) {
  SimConfig config;
  for (const auto& [key, value] : overrides) {
    const std::string k = py::str(key);
    std::string text;
    if (py::isinstance<py::list>(value) || py::isinstance<py::tuple>(value)) {
      for (const auto& item : value.cast<py::sequence>()) text += (text.empty() ? "" : ",") + std::string(py::str(item));
    } else if (py::isinstance<py::bool_>(value)) {
      text = value.cast<bool>() ? "true" : "false";
    } else {
      text = py::str(value);
    }
    apply_config_entry(config, k, text);
  }
  config.validate();
  return config;
}

py::dict fit_result(const ProposedFit& fit, const Dataset& data) {
  nlohmann::json doc{{"result", to_json(fit.result)}, {"diagnostics", fit_diagnostics(fit.fit, data)}};
  py::dict out = to_python(doc).cast<py::dict>();
  out["beta"] = fit.fit.beta_hat;
  out["active_set"] = fit.fit.active_set;
  out["tau"] = fit.fit.tau;
  return out;
}

}  // namespace

PYBIND11_MODULE(_survcbps, m) {
  m.doc() = "Penalized empirical-likelihood CBPS for survival treatment effects";

  static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
  static py::exception<DataError> data_error(m, "DataError", base.ptr());
  static py::exception<DegenerateError> degenerate_error(m, "DegenerateError", base.ptr());
  static py::exception<ConvergenceError> convergence_error(m, "ConvergenceError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const DataError& e) {
      py::set_error(data_error, e.what());
    } catch (const DegenerateError& e) {
      py::set_error(degenerate_error, e.what());
    } catch (const ConvergenceError& e) {
      py::set_error(convergence_error, e.what());
    } catch (const Error& e) {
      py::set_error(base, e.what());
    }
  });

  py::enum_<Arm>(m, "Arm").value("control", Arm::control).value("treated", Arm::treated);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init(&make_dataset), py::arg("y"), py::arg("delta"), py::arg("d"), py::arg("x"),
           py::arg("covariate_names") = std::vector<std::string>{})
      .def_property_readonly("n", &Dataset::n)
      .def_property_readonly("p", &Dataset::p)
      .def_property_readonly("y", &Dataset::y)
      .def_property_readonly("delta", &Dataset::delta)
      .def_property_readonly("d", &Dataset::d)
      .def_property_readonly("x", &Dataset::x)
      .def_property_readonly("covariate_names", &Dataset::covariate_names)
      .def("summary", [](const Dataset& data) { return to_python(to_json(summarize(data))); })
      .def("to_csv",
           [](const Dataset& data) {
             std::ostringstream out;
             write_csv(data, out);
             return out.str();
           })
      .def("__eq__", [](const Dataset& a, const Dataset& b) { return a == b; });

  m.def(
      "read_csv",
      [](const std::filesystem::path& path, const std::string& y, const std::string& delta, const std::string& d,
         std::vector<std::string> x) { return parse_csv(path, CsvSchema{y, delta, d, std::move(x)}); },
      py::arg("path"), py::arg("y_col") = "y", py::arg("delta_col") = "delta", py::arg("d_col") = "d",
      py::arg("x_cols") = std::vector<std::string>{});
  m.def(
      "write_csv", [](const Dataset& data, const std::filesystem::path& path) { write_csv(data, path); },
      py::arg("data"), py::arg("path"));

  py::class_<CensorSurvival>(m, "CensorSurvival")
      .def("__call__", [](const CensorSurvival& k, double u) { return k(u); })
      .def("__call__",
           [](const CensorSurvival& k, const Eigen::VectorXd& u) { return Eigen::VectorXd(u.unaryExpr(k)); })
      .def_property_readonly("jump_times", &CensorSurvival::jump_times)
      .def_property_readonly("values", &CensorSurvival::values)
      .def_property_readonly("floor", &CensorSurvival::floor);
  py::class_<CensorModels>(m, "CensorModels")
      .def_readonly("treated", &CensorModels::treated)
      .def_readonly("control", &CensorModels::control);
  m.def("fit_censoring_km", &fit_censoring_km, py::arg("data"), py::arg("arm"), py::arg("floor") = kDefaultKmFloor);
  m.def("fit_censoring_models", &fit_censoring_models, py::arg("data"), py::arg("floor") = kDefaultKmFloor);

  m.def(
      "stack_g",
      [](const Eigen::VectorXd& beta, const Dataset& data, const CensorModels& k, double clip) {
        return stack_g({beta, clip}, data, k);
      },
      py::arg("beta"), py::arg("data"), py::arg("censor"), py::arg("clip") = kDefaultScoreClip);
  m.def(
      "jacobian_g",
      [](const Eigen::VectorXd& beta, const Dataset& data, const CensorModels& k, double clip) {
        return jacobian_g({beta, clip}, data, k);
      },
      py::arg("beta"), py::arg("data"), py::arg("censor"), py::arg("clip") = kDefaultScoreClip);

  m.def(
      "solve_inner_dual",
      [](const Eigen::MatrixXd& g, const Eigen::VectorXd& lambda_init, double tolerance, int max_iterations) {
        const ELDualState s = solve_inner_dual(g, lambda_init, DualOptions{tolerance, max_iterations});
        py::dict out;
        out["lambda"] = s.lambda;
        out["objective"] = s.inner_objective;
        out["grad_norm"] = s.grad_norm;
        out["iterations"] = s.iterations;
        out["converged"] = s.converged;
        out["weights"] = el_weights(g, s);
        return out;
      },
      py::arg("g"), py::arg("lambda_init") = Eigen::VectorXd(), py::arg("tolerance") = 1e-8,
      py::arg("max_iterations") = 100);

  m.def(
      "scad_derivative", [](double t, double lambda, double a) { return scad_derivative(t, ScadParams{lambda, a}); },
      py::arg("beta_abs"), py::arg("lam"), py::arg("a") = kDefaultScadShape);
  m.def(
      "scad_value", [](double t, double lambda, double a) { return scad_value(t, ScadParams{lambda, a}); },
      py::arg("beta_abs"), py::arg("lam"), py::arg("a") = kDefaultScadShape);

  m.def("default_tau_grid", &default_tau_grid, py::arg("n"), py::arg("p"), py::arg("count") = 20, py::arg("lo") = 0.01,
        py::arg("hi") = 2.0);

  m.def(
      "fit",
      [](const Dataset& data, std::optional<double> tau, std::vector<double> grid, double level, double clip,
         double km_floor) {
        ProposedOptions options;
        options.tau = tau;
        options.grid = std::move(grid);
        options.ate.level = level;
        options.ate.score_clip = clip;
        const CensorModels k = fit_censoring_models(data, km_floor);
        return fit_result(fit_proposed(data, k, options), data);
      },
      py::arg("data"), py::arg("tau") = py::none(), py::arg("tau_grid") = std::vector<double>{},
      py::arg("level") = 0.95, py::arg("clip") = kDefaultScoreClip, py::arg("km_floor") = kDefaultKmFloor);

  m.def(
      "fit_baseline",
      [](const Dataset& data, const std::string& method, int bootstrap, std::uint64_t seed, double level, double clip,
         double km_floor) {
        const auto kind = parse_estimator(method);
        if (!kind || *kind == EstimatorKind::proposed) throw DataError("unknown baseline '" + method + "'");
        BaselineOptions options;
        options.bootstrap = bootstrap;
        options.seed = seed;
        options.level = level;
        options.score_clip = clip;
        options.km_floor = km_floor;
        return to_python(to_json(run_baseline({*kind, options}, data, fit_censoring_models(data, km_floor))));
      },
      py::arg("data"), py::arg("method"), py::arg("bootstrap") = 200, py::arg("seed") = 42, py::arg("level") = 0.95,
      py::arg("clip") = kDefaultScoreClip, py::arg("km_floor") = kDefaultKmFloor);

  m.def(
      "generate_dataset",
      [](const py::dict& config, std::uint64_t seed) {
        const SimConfig c = config_from(config);
        return generate_dataset(c, seed).data;
      },
      py::arg("config") = py::dict(), py::arg("seed") = 42);

  m.def(
      "simulate",
      [](const py::dict& config, int workers) {
        const SimConfig c = config_from(config);
        SimReport report;
        {
          py::gil_scoped_release release;
          report = run_study(c, workers);
        }
        std::ostringstream csv;
        write_report_csv(report, csv);
        py::dict out;
        out["report"] = to_python(report_to_json(report));
        out["csv"] = csv.str();
        return out;
      },
      py::arg("config") = py::dict(), py::arg("workers") = 1);

  m.def(
      "render_report", [](const py::object& dump) { return render_report(from_python(dump)); }, py::arg("report"));
}
