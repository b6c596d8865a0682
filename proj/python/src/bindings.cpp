#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "priorweaver/predictive_check.hpp"
#include "priorweaver/prior_engine.hpp"
#include "priorweaver/serialization.hpp"
#include "priorweaver/service.hpp"
#include "priorweaver/simulate.hpp"

namespace py = pybind11;
using namespace priorweaver;

namespace {

json parse_or_empty(const std::string& text) { return text.empty() ? json() : parse_json(text); }

Snapshot load_snapshot(const std::string& snapshot_json) { return snapshot_from_json(parse_json(snapshot_json)); }

// Priors JSON for `snapshot_json` under the snapshot's own model unless
// `formula` names another one over the same variables.
std::string derive(const std::string& snapshot_json, const std::string& formula, const std::string& config_json) {
    const Snapshot snap = load_snapshot(snapshot_json);
    const ModelSpec model = formula.empty() ? snap.model : parse_model(formula);
    BootstrapConfig base;
    base.seed = snap.dataset.seed();
    const BootstrapConfig cfg = bootstrap_config_from_json(parse_or_empty(config_json), base);
    const auto priors = derive_priors(snap.dataset, model, cfg);
    return dump(priors_to_json({model.to_formula(), snapshot_fingerprint(snap.model, snap.dataset), cfg, priors}));
}

py::tuple check(const std::string& snapshot_json, const std::string& priors_json, const std::string& config_json) {
    const Snapshot snap = load_snapshot(snapshot_json);
    const PriorsDocument priors = priors_from_json(parse_json(priors_json));
    const ModelSpec model = parse_model(priors.model_formula);
    PredictiveConfig base;
    base.seed = snap.dataset.seed();
    const PredictiveConfig cfg = predictive_config_from_json(parse_or_empty(config_json), base);
    const auto result = run_check(snap.dataset, model, priors.priors, cfg);
    return py::make_tuple(dump(check_to_json(model, result)), check_to_csv(result));
}

py::dict model_info(const ModelSpec& m) {
    py::list params;
    for (const auto& p : m.parameters) params.append(p.name);
    py::dict d;
    d["formula"] = m.to_formula();
    d["response"] = m.response;
    d["predictors"] = m.predictors;
    d["has_intercept"] = m.has_intercept;
    d["parameters"] = params;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "priorweaver native core";

    static py::exception<Error> error(m, "Error");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetObject(error.ptr(), py::make_tuple(e.code(), e.message(), e.step()).ptr());
        }
    });

    m.def("parse_model", [](const std::string& formula) { return model_info(parse_model(formula)); }, py::arg("formula"));

    m.def(
        "ols_fit",
        [](const Eigen::MatrixXd& rows, const std::string& formula) -> Eigen::VectorXd { return ols_fit(rows, parse_model(formula)); },
        py::arg("rows"), py::arg("formula"),
        "Coefficients followed by the residual standard deviation. Columns of `rows` are the predictors in model order, then the response.");

    m.def(
        "silverman_bandwidth", [](const std::vector<double>& samples) { return silverman_bandwidth(samples); }, py::arg("samples"));

    m.def(
        "kde",
        [](const std::vector<double>& samples, double lo, double hi, std::size_t points) {
            return kde(samples, DensityGrid{lo, hi, points});
        },
        py::arg("samples"), py::arg("lo"), py::arg("hi"), py::arg("points") = kDefaultGridPoints);

    m.def(
        "simulate_truth",
        [](const std::vector<double>& coefficients, double sigma, std::size_t rows, std::uint64_t seed) {
            const Snapshot s = simulate_truth(coefficients, sigma, rows, seed);
            return dump(snapshot_to_json(s.model, s.dataset));
        },
        py::arg("coefficients"), py::arg("sigma") = 1.0, py::arg("rows") = 200, py::arg("seed") = 0);

    m.def("derive_priors", &derive, py::arg("snapshot"), py::arg("formula") = "", py::arg("config") = "",
          "Priors JSON derived from a snapshot JSON string.");

    m.def("run_check", &check, py::arg("snapshot"), py::arg("priors"), py::arg("config") = "",
          "Returns (check_json, csv).");

    py::class_<Service>(m, "Service")
        .def(py::init([](std::optional<std::string> snapshot_dir) {
                 ServiceOptions o;
                 if (snapshot_dir) o.snapshot_dir = *snapshot_dir;
                 return std::make_unique<Service>(std::move(o));
             }),
             py::arg("snapshot_dir") = py::none())
        .def(
            "handle",
            [](Service& s, const std::string& method, const std::string& path, const std::string& body) {
                HttpResponse r;
                {
                    py::gil_scoped_release release;
                    r = s.handle({method, path, body});
                }
                return py::make_tuple(r.status, r.body);
            },
            py::arg("method"), py::arg("path"), py::arg("body") = "")
        .def_property_readonly("session_count", &Service::session_count);
}
