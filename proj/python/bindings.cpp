#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "icgkit/classify.hpp"
#include "icgkit/error.hpp"
#include "icgkit/features.hpp"
#include "icgkit/kinetics.hpp"
#include "icgkit/run_config.hpp"
#include "icgkit/scale.hpp"
#include "icgkit/series.hpp"

namespace py = pybind11;
using namespace icgkit;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array& a) {
    if (a.ndim() != 1) throw py::value_error("expected a 1-d array");
    return {a.data(), a.data() + a.size()};
}

Array to_array(const std::vector<double>& v) {
    return Array(static_cast<py::ssize_t>(v.size()), v.data());
}

py::object to_python(const Json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

Json from_python(const py::object& o) {
    return Json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

TimeSeries make_series(const Array& values, double period_s, double start_s) {
    auto s = TimeSeries::from_values(to_vector(values), period_s, start_s);
    s.validate();
    return s;
}

py::dict params_dict(const KineticParams& p) {
    py::dict d;
    d["D"] = p.damping;
    d["tau_s"] = p.tau_s;
    d["tau_i_s"] = p.tau_i_s;
    d["K"] = p.gain;
    d["b"] = p.background;
    d["t0_s"] = p.delay_s;
    return d;
}

py::object optional_value(const std::optional<double>& v) {
    return v ? py::object(py::float_(*v)) : py::object(py::none());
}

FeatureTable make_table(const Array& x, const std::vector<std::string>& columns,
                        const std::vector<std::string>& patients,
                        const std::vector<std::string>& labels) {
    if (x.ndim() != 2) throw py::value_error("features must be a 2-d array");
    const auto n = static_cast<std::size_t>(x.shape(0));
    const auto m = static_cast<std::size_t>(x.shape(1));
    if (columns.size() != m) throw py::value_error("column count does not match the array");
    if (patients.size() != n || labels.size() != n)
        throw py::value_error("patients and labels need one entry per row");
    FeatureTable t;
    t.columns = columns;
    for (std::size_t i = 0; i < n; ++i) {
        FeatureRow row;
        row.key = {patients[i], "R" + std::to_string(i + 1)};
        row.values.assign(x.data() + i * m, x.data() + (i + 1) * m);
        row.label = labels[i];
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace

PYBIND11_MODULE(_icgkit, m) {
    m.doc() = "ICG perfusion curve kinetics, features and classification";

    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

    m.def(
        "simulate",
        [](double D, double tau_s, double tau_i_s, double K, double b, double t0_s,
           const Array& t) {
            KineticParams p{D, tau_s, tau_i_s, K, b, t0_s};
            return to_array(simulate(p, to_vector(t)).values);
        },
        py::arg("D"), py::arg("tau_s"), py::arg("tau_i_s"), py::arg("K"), py::arg("b") = 0.0,
        py::arg("t0_s") = 0.0, py::arg("t"), "Model response on the time grid t (seconds).");

    m.def(
        "jacobian_check",
        [](double D, double tau_s, double tau_i_s, double K, double b, double t0_s,
           const Array& t) {
            return jacobian_check(KineticParams{D, tau_s, tau_i_s, K, b, t0_s}, to_vector(t));
        },
        py::arg("D"), py::arg("tau_s"), py::arg("tau_i_s"), py::arg("K"), py::arg("b") = 0.0,
        py::arg("t0_s") = 0.0, py::arg("t"),
        "Largest relative deviation of the analytic Jacobian from central differences.");

    m.def(
        "fit",
        [](const Array& values, double period_s, std::optional<double> truncate_at_s,
           std::uint64_t seed) {
            FitConfig c;
            c.seed = seed;
            c.truncate_at_s = truncate_at_s;
            const FitResult r = fit(make_series(values, period_s, 0.0), c);
            py::dict d = params_dict(r.params);
            d["rmse"] = r.rmse;
            d["n_iterations"] = r.n_iterations;
            d["converged"] = r.converged;
            d["truncation_time_s"] = r.truncation_time_s;
            return d;
        },
        py::arg("values"), py::arg("period_s"), py::arg("truncate_at_s") = py::none(),
        py::arg("seed") = 0, "Fit the kinetic model to a uniformly sampled curve.");

    m.def(
        "center_of_mass",
        [](const Array& values, double period_s) {
            return center_of_mass(make_series(values, period_s, 0.0));
        },
        py::arg("values"), py::arg("period_s"));

    m.def(
        "simple_features",
        [](const Array& values, double period_s) {
            const SimpleFeatures f = simple_features(make_series(values, period_s, 0.0));
            py::dict d;
            d["ttp_s"] = f.ttp_s;
            d["upslope"] = f.upslope;
            d["downslope"] = optional_value(f.downslope);
            d["time_ratio"] = optional_value(f.time_ratio);
            d["time_ratio_censored"] = f.time_ratio_censored;
            d["mu_s"] = f.center_of_mass_s;
            d["onset_time_s"] = f.landmarks.onset_time_s;
            d["peak_time_s"] = f.landmarks.peak_time_s;
            return d;
        },
        py::arg("values"), py::arg("period_s"));

    m.def(
        "estimate_scale",
        [](const Array& test, const Array& reference, double period_s) {
            const ScaleEstimate e = estimate_scale(make_series(test, period_s, 0.0),
                                                   make_series(reference, period_s, 0.0));
            py::dict d;
            d["scale"] = e.scale;
            d["residual_rms"] = e.residual_rms;
            return d;
        },
        py::arg("test"), py::arg("reference"), py::arg("period_s"),
        "Time scale s that maps the reference onto the test curve.");

    m.def(
        "train",
        [](const Array& x, const std::vector<std::string>& columns,
           const std::vector<std::string>& patients, const std::vector<std::string>& labels,
           const std::string& kind) {
            const auto table = make_table(x, columns, patients, labels);
            return to_python(model_to_json(train(table, parse_model_kind(kind))));
        },
        py::arg("x"), py::arg("columns"), py::arg("patients"), py::arg("labels"),
        py::arg("kind") = "knn", "Train a classifier; returns the model as a dict.");

    m.def(
        "predict",
        [](const py::object& model, const Array& x) {
            const ClassifierModel mdl = model_from_json(from_python(model));
            if (x.ndim() != 2) throw py::value_error("features must be a 2-d array");
            const auto m = static_cast<std::size_t>(x.shape(1));
            std::vector<std::string> out;
            for (py::ssize_t i = 0; i < x.shape(0); ++i) {
                std::vector<double> row(x.data() + i * m, x.data() + (i + 1) * m);
                out.push_back(mdl.class_labels[predict(mdl, row).class_index]);
            }
            return out;
        },
        py::arg("model"), py::arg("x"));

    m.def(
        "cross_validate",
        [](const Array& x, const std::vector<std::string>& columns,
           const std::vector<std::string>& patients, const std::vector<std::string>& labels,
           const std::string& kind) {
            const auto table = make_table(x, columns, patients, labels);
            return to_python(cv_to_json(cross_validate(table, parse_model_kind(kind))));
        },
        py::arg("x"), py::arg("columns"), py::arg("patients"), py::arg("labels"),
        py::arg("kind") = "knn", "Leave-one-patient-out cross-validation.");

    m.def("default_config", [] { return to_python(run_config_to_json(RunConfig{})); });
}
