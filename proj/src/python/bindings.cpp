#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>

#include "aqem/commands.hpp"
#include "aqem/engine.hpp"
#include "aqem/policies.hpp"
#include "aqem/qsym.hpp"
#include "aqem/regress.hpp"
#include "aqem/trainer.hpp"

namespace py = pybind11;
using namespace aqem;

namespace {

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

py::dict record_dict(const RunRecord& r) {
    py::dict d;
    d["n"] = r.n;
    d["policy"] = r.policy;
    d["noise"] = r.noise;
    d["trials"] = r.trials;
    d["sharpness"] = r.sharpness;
    d["holevo"] = r.holevo;
    d["holevo_stderr"] = r.holevo_stderr;
    d["seed"] = r.seed;
    d["aborts"] = r.aborts;
    d["valid"] = r.valid;
    return d;
}

// "bayes", "sql", or a list of phase adjustments.
Controller controller_from(const py::object& spec) {
    if (py::isinstance<py::str>(spec)) {
        const auto name = spec.cast<std::string>();
        if (name == "bayes") return BayesController{false};
        if (name == "sql") return BayesController{true};
        throw std::invalid_argument("controller must be 'bayes', 'sql' or a list of deltas");
    }
    if (py::isinstance<MarkovPolicy>(spec)) return spec.cast<MarkovPolicy>();
    return MarkovPolicy(spec.cast<std::vector<double>>());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Adaptive phase estimation: simulation, training, sweeps and scaling fits";

    py::register_exception<ZeroProbabilityError>(m, "ZeroProbabilityError", PyExc_ArithmeticError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<MissingInputError>(m, "MissingInputError", PyExc_FileNotFoundError);

    py::enum_<NoiseModel>(m, "NoiseModel")
        .value("none", NoiseModel::none)
        .value("normal", NoiseModel::normal)
        .value("random_telegraph", NoiseModel::random_telegraph)
        .value("skew_normal", NoiseModel::skew_normal)
        .value("log_normal", NoiseModel::log_normal);

    py::class_<NoiseSpec>(m, "NoiseSpec")
        .def(py::init([](NoiseModel model, double variance, double skewness) {
                 NoiseSpec s{model, variance, skewness};
                 s.validate();
                 return s;
             }),
             py::arg("model") = NoiseModel::none, py::arg("variance") = 0.0, py::arg("skewness") = 0.0)
        .def_readonly("model", &NoiseSpec::model)
        .def_readonly("variance", &NoiseSpec::variance)
        .def_readonly("skewness", &NoiseSpec::skewness)
        .def_property_readonly("tag", &NoiseSpec::tag)
        .def("__eq__", [](const NoiseSpec& a, const NoiseSpec& b) { return a == b; })
        .def("__repr__", [](const NoiseSpec& s) { return "NoiseSpec(" + s.tag() + ")"; });
    m.attr("TEST_SKEWNESS") = kTestSkewness;
    m.def("default_noise_grid", &default_noise_grid);

    m.def(
        "sample_phases",
        [](const NoiseSpec& spec, double phi0, long count, std::uint64_t seed) {
            const auto params = params_from_spec(spec);
            Rng rng(seed);
            std::vector<double> out(static_cast<std::size_t>(count));
            for (auto& v : out) v = sample_phase(params, PhaseAngle(phi0), rng).value();
            return out;
        },
        py::arg("spec"), py::arg("phi0"), py::arg("count"), py::arg("seed") = 1);

    m.def("wigner_d", &wigner_d, py::arg("j"), py::arg("m"), py::arg("mp"), py::arg("beta"));
    m.def(
        "sine_state",
        [](int n) {
            const auto s = sine_state(n);
            return std::vector<Complex>(s.amplitudes().begin(), s.amplitudes().end());
        },
        py::arg("photons"));
    m.def(
        "detection_probability",
        [](const std::vector<Complex>& amp, double theta, int port) {
            return detection_probability(SymmetricState(amp), theta, port);
        },
        py::arg("amplitudes"), py::arg("theta"), py::arg("port"));

    py::class_<MarkovPolicy>(m, "MarkovPolicy")
        .def(py::init<std::vector<double>>(), py::arg("deltas"))
        .def_property_readonly("deltas", &MarkovPolicy::deltas)
        .def_property_readonly("size", &MarkovPolicy::size)
        .def_readwrite("trained_on", &MarkovPolicy::trained_on)
        .def_readwrite("seed", &MarkovPolicy::seed)
        .def_readwrite("objective", &MarkovPolicy::objective)
        .def("to_json", [](const MarkovPolicy& p) { return to_python(policy_to_json(p)); });
    m.def("load_policy", [](const std::string& path) { return load_policy(path); }, py::arg("path"));
    m.def(
        "save_policy", [](const MarkovPolicy& p, const std::string& path) { save_policy(p, path); }, py::arg("policy"),
        py::arg("path"));

    m.def("sharpness_of", &sharpness_of, py::arg("errors"));
    m.def("holevo_variance", &holevo_variance, py::arg("sharpness"));

    m.def(
        "estimate",
        [](const py::object& controller, int n, const NoiseSpec& noise, long trials, std::uint64_t seed, int workers) {
            RunOptions opt;
            opt.workers = workers;
            opt.record_timing = false;
            const auto c = controller_from(controller);
            RunRecord rec;
            {
                py::gil_scoped_release release;
                rec = estimate_sharpness_variance(c, n, noise, trials, seed, opt);
            }
            return record_dict(rec);
        },
        py::arg("controller"), py::arg("n"), py::arg("noise") = NoiseSpec{}, py::arg("trials") = 1000,
        py::arg("seed") = 1, py::arg("workers") = 1,
        "Sharpness and Holevo variance of one (controller, N, noise) point. The controller is\n"
        "'bayes', 'sql' (product-state Bayesian reference) or a list of Markov phase adjustments.");

    m.def(
        "sweep",
        [](const std::string& controller, const std::vector<int>& sizes, const NoiseSpec& noise, std::uint64_t seed,
           long trials, int workers) {
            ControllerFamily fam;
            if (controller == "sql") fam.kind = ControllerFamily::Kind::product_reference;
            else if (controller != "bayes") throw std::invalid_argument("sweep controller must be 'bayes' or 'sql'");
            RunOptions opt;
            opt.workers = workers;
            opt.record_timing = false;
            std::vector<RunRecord> recs;
            {
                py::gil_scoped_release release;
                recs = sweep_curve(fam, sizes, noise, seed, TrialRule{trials, 0, 0}, opt);
            }
            py::list out;
            for (const auto& r : recs) out.append(record_dict(r));
            return out;
        },
        py::arg("controller"), py::arg("sizes"), py::arg("noise") = NoiseSpec{}, py::arg("seed") = 1,
        py::arg("trials") = 0, py::arg("workers") = 1);

    m.def(
        "train_policy",
        [](int n, const NoiseSpec& noise, int population, int generations, std::uint64_t seed, int samples_per_eval,
           std::optional<MarkovPolicy> warm_start, int workers) {
            TrainConfig cfg;
            cfg.n = n;
            cfg.noise = noise;
            cfg.population = population;
            cfg.generations = generations;
            cfg.seed = seed;
            cfg.samples_per_eval = samples_per_eval;
            cfg.workers = workers;
            py::gil_scoped_release release;
            return train_policy(cfg, warm_start).policy;
        },
        py::arg("n"), py::arg("noise") = NoiseSpec{}, py::arg("population") = 40, py::arg("generations") = 50,
        py::arg("seed") = 0, py::arg("samples_per_eval") = 0, py::arg("warm_start") = std::nullopt,
        py::arg("workers") = 1);

    m.def(
        "fit_scaling",
        [](const std::vector<int>& n, const std::vector<double>& holevo) {
            const auto series = LogSeries::from_curve(n, holevo);
            const RegressOptions opt;
            return to_python(report_to_json(fit_series(series, opt), series, n, opt));
        },
        py::arg("n"), py::arg("holevo"),
        "Piecewise-linear fits of log V_H against log N with majority-vote selection; returns the report.");

    m.def(
        "robustness_threshold",
        [](const std::vector<std::pair<double, double>>& points) { return robustness_threshold(points); },
        py::arg("points"));
}
