#include "ctrirl/cli.hpp"
#include "ctrirl/error.hpp"
#include "ctrirl/experiment.hpp"
#include "ctrirl/gridworld.hpp"
#include "ctrirl/maxent.hpp"
#include "ctrirl/metrics.hpp"
#include "ctrirl/solver.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace ctrirl;

namespace {

// Arrays cross the boundary as plain numpy (S, A) tables; the wrapper types
// stay on the C++ side.
StateActionFn table(const Matrix& m) { return StateActionFn(m); }

TransitionDataset make_dataset(const Eigen::Matrix<Index, Eigen::Dynamic, 3, Eigen::RowMajor>& records,
                               Index n_states, Index n_actions, std::uint64_t seed, const std::string& env) {
    std::vector<Transition> rows;
    rows.reserve(static_cast<std::size_t>(records.rows()));
    for (Index i = 0; i < records.rows(); ++i) rows.push_back({records(i, 0), records(i, 1), records(i, 2)});
    return TransitionDataset(DatasetMeta{env, seed, n_states, n_actions}, std::move(rows));
}

Eigen::Matrix<Index, Eigen::Dynamic, 3, Eigen::RowMajor> dataset_records(const TransitionDataset& d) {
    Eigen::Matrix<Index, Eigen::Dynamic, 3, Eigen::RowMajor> out(static_cast<Index>(d.size()), 3);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const Transition& t = d.records()[i];
        out.row(static_cast<Index>(i)) << t.s, t.a, t.next;
    }
    return out;
}

py::dict diagnostics_dict(const SolverDiagnostics& d) {
    py::dict out;
    out["iterations"] = d.iterations;
    out["eta"] = d.eta;
    out["eta_population"] = d.eta_population;
    out["unvisited_cells"] = d.unvisited_cells;
    out["nu_proxy"] = d.nu_proxy;
    out["nu_population"] = d.nu_population;
    out["kappa_hat"] = d.kappa_hat;
    out["kappa_reference"] = d.kappa_reference;
    out["n_classify"] = d.n_classify;
    out["n_regress"] = d.n_regress;
    out["fold_size"] = d.fold_size;
    out["warnings"] = d.warnings;
    py::list iterates;
    for (const auto& v : d.iterates) iterates.append(v.values());
    out["iterates"] = iterates;
    return out;
}

py::dict metrics_dict(const MetricValues& m) {
    py::dict out;
    const auto values = as_array(m);
    for (std::size_t i = 0; i < values.size(); ++i) out[kMetricNames[i]] = values[i];
    out["corr_defined"] = m.corr_defined;
    return out;
}

PolicyTable measure_table(const TabularMdp& mdp, const std::string& kind, Index action,
                          const std::optional<Matrix>& behavior) {
    const MeasureKind k = parse_measure_kind(kind);
    if (k == MeasureKind::BehaviorPolicy && !behavior) throw InvalidArgument("mu='behavior' needs a behavior table");
    const PolicyTable b = behavior ? PolicyTable(*behavior) : PolicyTable::uniform(mdp.n_states(), mdp.n_actions());
    return make_measure(k, action, b).realized;
}

} // namespace

PYBIND11_MODULE(_ctrirl, m) {
    m.doc() = "Tabular reward recovery by classification and iterated regression";

    // Translators run newest first, so the base class is registered first.
    auto& base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
    py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
    py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", base.ptr());

    py::class_<TabularMdp>(m, "TabularMdp")
        .def(py::init([](Index S, Index A, const Matrix& p, double gamma) { return TabularMdp(S, A, p, gamma); }),
             py::arg("n_states"), py::arg("n_actions"), py::arg("transition"), py::arg("gamma"))
        .def_property_readonly("n_states", &TabularMdp::n_states)
        .def_property_readonly("n_actions", &TabularMdp::n_actions)
        .def_property_readonly("gamma", &TabularMdp::gamma)
        .def_property_readonly("transition", &TabularMdp::transition)
        .def("with_gamma", &TabularMdp::with_gamma);

    py::class_<Gridworld>(m, "Gridworld")
        .def_property_readonly("mdp", [](const Gridworld& g) { return g.mdp; })
        .def_property_readonly("r_true", [](const Gridworld& g) { return g.r_true.values(); })
        .def_property_readonly("features", [](const Gridworld& g) { return g.features.matrix(); })
        .def_property_readonly("env_id", [](const Gridworld& g) { return env_id(g.spec); });

    py::class_<TransitionDataset>(m, "Dataset")
        .def(py::init(&make_dataset), py::arg("records"), py::arg("n_states"), py::arg("n_actions"),
             py::arg("seed") = 0, py::arg("env_id") = "custom")
        .def("__len__", &TransitionDataset::size)
        .def_property_readonly("records", &dataset_records)
        .def_property_readonly("n_states", [](const TransitionDataset& d) { return d.meta().n_states; })
        .def_property_readonly("n_actions", [](const TransitionDataset& d) { return d.meta().n_actions; })
        .def_property_readonly("seed", [](const TransitionDataset& d) { return d.meta().seed; })
        .def_property_readonly("env_id", [](const TransitionDataset& d) { return d.meta().env_id; })
        .def("counts", &count_table)
        .def("save", [](const TransitionDataset& d, const std::string& path) { write_dataset(path, d); });

    m.def("read_dataset", [](const std::string& path) { return read_dataset(path); });

    py::class_<IrlSolution>(m, "Solution")
        .def_property_readonly("r", [](const IrlSolution& s) { return s.r_hat.values(); })
        .def_property_readonly("v", [](const IrlSolution& s) { return s.v_hat.values(); })
        .def_property_readonly("u", [](const IrlSolution& s) { return s.u_hat.values(); })
        .def_property_readonly("c", [](const IrlSolution& s) { return s.c_hat.values(); })
        .def_property_readonly("mu", [](const IrlSolution& s) { return s.mu.probs(); })
        .def_property_readonly("gamma", [](const IrlSolution& s) { return s.gamma; })
        .def_property_readonly("q", [](const IrlSolution& s) { return q_hat(s).values(); })
        .def_property_readonly("diagnostics", [](const IrlSolution& s) { return diagnostics_dict(s.diagnostics); })
        .def("save", [](const IrlSolution& s, const std::string& dir) { write_solution(dir, s); });

    m.def("read_solution", [](const std::string& dir) { return read_solution(dir); });

    m.def(
        "build_env",
        [](const std::string& preset_name, std::optional<std::uint64_t> seed, std::optional<double> gamma) {
            GridworldSpec spec = preset(preset_name).env;
            if (seed) spec.seed = *seed;
            if (gamma) spec.gamma = *gamma;
            return build_env(spec);
        },
        py::arg("preset") = "easy", py::arg("seed") = py::none(), py::arg("gamma") = py::none(),
        "Gridworld of a built-in preset, optionally with another seed or discount.");

    m.def(
        "expert_policy", [](const TabularMdp& mdp, const Matrix& r) { return expert_policy(mdp, table(r)).probs(); },
        py::arg("mdp"), py::arg("r"));

    m.def(
        "sample",
        [](const TabularMdp& mdp, const Matrix& pi, std::size_t n, std::uint64_t seed, const std::string& regime) {
            return sample_transitions(mdp, PolicyTable(pi), n, StateDistribution::uniform(mdp.n_states()),
                                      parse_sampling_regime(regime), seed);
        },
        py::arg("mdp"), py::arg("pi"), py::arg("n"), py::arg("seed") = 0, py::arg("regime") = "iid-restart",
        "Demonstrations from pi, started uniformly over states.");

    m.def(
        "soft_value_iteration",
        [](const TabularMdp& mdp, const Matrix& r, double tol) {
            const SoftValueResult res = soft_value_iteration(mdp, table(r), tol, 1000000);
            return py::make_tuple(res.v.values(), res.pi_star.probs());
        },
        py::arg("mdp"), py::arg("r"), py::arg("tol") = 1e-10, "Returns (v, pi_star).");

    m.def(
        "exact_solver",
        [](const TabularMdp& mdp, const Matrix& pi, const std::string& mu, Index mu_action) {
            const PolicyTable p(pi);
            const PolicyTable ref = measure_table(mdp, mu, mu_action, pi);
            NormalizationMeasure measure{parse_measure_kind(mu), mu_action, ref};
            return exact_population_solver(mdp, p, measure);
        },
        py::arg("mdp"), py::arg("pi"), py::arg("mu") = "uniform", py::arg("mu_action") = 0,
        "Population solution from the true policy.");

    m.def(
        "solve",
        [](const TransitionDataset& data, double gamma, std::optional<std::size_t> K, const std::string& mu,
           Index mu_action, bool split, std::size_t folds, std::uint64_t split_seed, bool keep_iterates) {
            SolverConfig cfg;
            cfg.gamma = gamma;
            cfg.K = K;
            cfg.mu = parse_measure_kind(mu);
            cfg.mu_action = mu_action;
            cfg.split = split;
            cfg.folds = folds;
            cfg.split_seed = split_seed;
            cfg.keep_iterates = keep_iterates;
            return solve(data, cfg);
        },
        py::arg("data"), py::arg("gamma"), py::arg("K") = py::none(), py::arg("mu") = "uniform",
        py::arg("mu_action") = 0, py::arg("split") = false, py::arg("folds") = 0, py::arg("split_seed") = 0,
        py::arg("keep_iterates") = false, "Tabular classify-then-regress solver.");

    m.def(
        "shape",
        [](const TabularMdp& mdp, const Matrix& r, const Matrix& v, const Vector& c) {
            const Shaped s = shape(table(r), table(v), StateFn(c), mdp);
            return py::make_tuple(s.r.values(), s.v.values());
        },
        py::arg("mdp"), py::arg("r"), py::arg("v"), py::arg("c"));

    m.def(
        "soft_bellman_residual",
        [](const TabularMdp& mdp, const Matrix& r, const Matrix& v) {
            return soft_bellman_residual(mdp, table(r), table(v)).values();
        },
        py::arg("mdp"), py::arg("r"), py::arg("v"));

    m.def(
        "evaluate",
        [](const TabularMdp& mdp, const Matrix& r_true, const Matrix& q_hat, Index ref_action) {
            const EvalTruth truth = make_truth(mdp, table(r_true));
            return metrics_dict(evaluate(truth, table(q_hat), StateDistribution::uniform(mdp.n_states()), ref_action));
        },
        py::arg("mdp"), py::arg("r_true"), py::arg("q_hat"), py::arg("ref_action") = 0,
        "RMSE, Corr, KL, TV and Top-1 of an estimate, uniform state weights.");

    m.def(
        "maxent_fit",
        [](const TabularMdp& mdp, const Matrix& features, const TransitionDataset& data, const std::string& optimizer,
           double step_size, std::size_t max_epochs, std::uint64_t seed) {
            MaxEntConfig cfg;
            cfg.optimizer = parse_maxent_optimizer(optimizer);
            cfg.step_size = step_size;
            cfg.max_epochs = max_epochs;
            cfg.init_seed = seed;
            const MaxEntFit fit = maxent_fit(mdp, FeatureMap(mdp.n_states(), mdp.n_actions(), features), data, cfg);
            py::dict out;
            out["theta"] = fit.theta;
            out["r"] = fit.r_hat.values();
            out["v"] = fit.v_hat.values();
            out["q"] = (fit.r_hat + mdp.gamma() * fit.v_hat).values();
            out["loss_trace"] = fit.loss_trace;
            out["best_epoch"] = fit.best_epoch;
            out["epochs_run"] = fit.epochs_run;
            return out;
        },
        py::arg("mdp"), py::arg("features"), py::arg("data"), py::arg("optimizer") = "gradient-ascent",
        py::arg("step_size") = 1.0, py::arg("max_epochs") = 300, py::arg("seed") = 0,
        "Linear MaxEnt IRL baseline; q is r + gamma v.");

    m.def("auto_iterations", &auto_iterations, py::arg("n"), py::arg("gamma"));

    m.def(
        "reproduce",
        [](const std::string& config_text, std::optional<std::size_t> reruns, std::optional<std::uint64_t> seed) {
            ExperimentConfig cfg = parse_config(config_text);
            if (reruns) cfg.reruns = *reruns;
            if (seed) cfg.base_seed = *seed;
            ExperimentResult res;
            {
                py::gil_scoped_release release;
                res = run_experiment(cfg);
            }
            py::dict out;
            out["raw_csv"] = raw_csv(res);
            out["summary_csv"] = summary_csv(res);
            out["table"] = markdown_table(res);
            return out;
        },
        py::arg("config"), py::arg("reruns") = py::none(), py::arg("seed") = py::none(),
        "Seeded reruns of an INI config (text, e.g. 'preset = easy').");

    m.def(
        "cli_main",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "ctrirl");
            std::vector<const char*> argv;
            for (const auto& a : args) argv.push_back(a.c_str());
            std::ostringstream out, err;
            const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the ctrirl command in-process; returns (exit code, stdout, stderr).");
}
