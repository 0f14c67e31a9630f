#include "ctrirl/cli.hpp"

#include "ctrirl/error.hpp"
#include "ctrirl/experiment.hpp"
#include "text_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>

namespace ctrirl {

namespace {

struct Common {
    std::string config_path;
    std::string preset_name;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c, bool with_preset_flag = true) {
    cmd->add_option("--config", c.config_path, "INI config file");
    if (with_preset_flag) cmd->add_option("--preset", c.preset_name, "built-in config: easy|ident|hard");
    cmd->add_option("--seed", c.seed, "seed");
    cmd->add_option("--out", c.out, "output path");
    cmd->add_flag("--quiet", c.quiet, "suppress progress output");
}

ExperimentConfig resolve_config(const Common& c) {
    if (!c.config_path.empty() && !c.preset_name.empty()) {
        throw InvalidArgument("give either --config or a preset, not both");
    }
    if (!c.config_path.empty()) return load_config(c.config_path);
    if (!c.preset_name.empty()) return preset(c.preset_name);
    return preset("ident");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw Error("write failed for " + path.string());
}

SolverConfig solver_for(const ExperimentConfig& cfg, const Gridworld& env, std::uint64_t seed) {
    RerunSeeds seeds;
    seeds.split = seed;
    return solver_config_for(cfg, env, seeds);
}

Gridworld env_for(ExperimentConfig cfg, std::uint64_t seed) {
    cfg.env.seed = seed;
    return build_env(cfg.env);
}

void check_dataset_matches(const TransitionDataset& data, const Gridworld& env) {
    if (data.meta().n_states != env.mdp.n_states() || data.meta().n_actions != env.mdp.n_actions()) {
        throw InvalidArgument("dataset has " + std::to_string(data.meta().n_states) + " states and " +
                              std::to_string(data.meta().n_actions) + " actions but the configured env has " +
                              std::to_string(env.mdp.n_states()) + " and " + std::to_string(env.mdp.n_actions()));
    }
}

nlohmann::ordered_json json_number(double x) {
    if (std::isfinite(x)) return x;
    return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
}

int run_gen_data(const Common& c, std::ostream& out) {
    ExperimentConfig cfg = resolve_config(c);
    const std::uint64_t seed = c.seed.value_or(cfg.env.seed);
    const Gridworld env = env_for(cfg, seed);
    const PolicyTable pi = expert_policy(env.mdp, env.r_true);
    GridworldSpec spec = cfg.env;
    spec.seed = seed;
    const TransitionDataset data = sample_transitions(
        env.mdp, pi, cfg.n, StateDistribution::uniform(env.mdp.n_states()), cfg.regime, seed, env_id(spec));
    const std::filesystem::path path = c.out.empty() ? std::filesystem::path("data.csv") : std::filesystem::path(c.out);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    write_dataset(path, data);
    if (!c.quiet) out << "wrote " << data.size() << " records (" << env_id(spec) << ", seed " << seed << ") to " << path.string() << '\n';
    return 0;
}

int run_solve(const Common& c, const std::string& dataset_path, std::ostream& out) {
    const ExperimentConfig cfg = resolve_config(c);
    const TransitionDataset data = read_dataset(dataset_path);
    const std::uint64_t seed = c.seed.value_or(data.meta().seed);
    const Gridworld env = env_for(cfg, seed);
    check_dataset_matches(data, env);
    const IrlSolution sol = solve(data, solver_for(cfg, env, seed));
    const std::filesystem::path dir = c.out.empty() ? std::filesystem::path("solution") : std::filesystem::path(c.out);
    write_solution(dir, sol,
                   {{"method", kOursMethod},
                    {"env", data.meta().env_id},
                    {"seed", std::to_string(seed)},
                    {"dataset", dataset_path},
                    {"config", cfg.name}});
    if (!c.quiet) {
        out << "solved " << data.size() << " records with K=" << sol.diagnostics.iterations << "; wrote " << dir.string()
            << '\n';
        for (const auto& w : sol.diagnostics.warnings) out << "warning: " << w << '\n';
    }
    return 0;
}

int run_baseline(const Common& c, const std::string& dataset_path, std::ostream& out) {
    const ExperimentConfig cfg = resolve_config(c);
    const TransitionDataset data = read_dataset(dataset_path);
    const std::uint64_t seed = c.seed.value_or(data.meta().seed);
    const Gridworld env = env_for(cfg, seed);
    check_dataset_matches(data, env);
    MaxEntConfig bcfg = cfg.baseline;
    bcfg.init_seed = seed;
    const MaxEntFit fit = maxent_fit(env.mdp, env.features, data, bcfg);

    const std::filesystem::path dir = c.out.empty() ? std::filesystem::path("baseline") : std::filesystem::path(c.out);
    std::filesystem::create_directories(dir);
    std::string theta = "i,theta\n";
    for (Index i = 0; i < fit.theta.size(); ++i) theta += std::to_string(i) + ',' + detail::format_double(fit.theta[i]) + '\n';
    write_text(dir / "theta.csv", theta);
    write_table(dir / "r.csv", fit.r_hat);
    write_table(dir / "v.csv", fit.v_hat);
    std::string loss = "epoch,loss,best\n";
    for (std::size_t i = 0; i < fit.loss_trace.size(); ++i) {
        loss += std::to_string(i + 1) + ',' + detail::format_double(fit.loss_trace[i]) + ',' +
                detail::format_double(fit.best_trace[i]) + '\n';
    }
    write_text(dir / "loss.csv", loss);
    nlohmann::ordered_json j;
    j["method"] = kMaxEntMethod;
    j["env"] = data.meta().env_id;
    j["seed"] = std::to_string(seed);
    j["dataset"] = dataset_path;
    j["config"] = cfg.name;
    j["gamma"] = env.mdp.gamma();
    j["epochs_run"] = fit.epochs_run;
    j["best_epoch"] = fit.best_epoch;
    j["best_loss"] = json_number(fit.best_trace.empty() ? std::nan("") : fit.best_trace.back());
    write_text(dir / "diagnostics.json", j.dump(2) + '\n');
    if (!c.quiet) {
        out << "fit MaxEnt in " << fit.epochs_run << " epochs (best " << fit.best_epoch << "); wrote " << dir.string()
            << '\n';
    }
    return 0;
}

int run_eval(const Common& c, const std::string& solution_dir, std::ostream& out) {
    const ExperimentConfig cfg = resolve_config(c);
    const std::filesystem::path dir(solution_dir);
    if (!std::filesystem::is_directory(dir)) throw Error("solution directory not found: " + dir.string());
    const StateActionFn r = read_table(dir / "r.csv");
    const StateActionFn v = read_table(dir / "v.csv");
    std::ifstream in(dir / "diagnostics.json");
    if (!in) throw Error("cannot open " + (dir / "diagnostics.json").string());
    nlohmann::json j;
    double gamma = 0.0;
    std::uint64_t seed = 0;
    try {
        in >> j;
        gamma = j.at("gamma").get<double>();
        if (j.contains("seed")) seed = std::stoull(j.at("seed").get<std::string>());
    } catch (const std::exception& e) {
        throw ParseError((dir / "diagnostics.json").string() + ": " + e.what(), 0);
    }
    seed = c.seed.value_or(seed);
    const Gridworld env = env_for(cfg, seed);
    if (r.n_states() != env.mdp.n_states() || r.n_actions() != env.mdp.n_actions()) {
        throw ShapeError("solution tables do not match the configured env");
    }
    const EvalTruth truth = make_truth(env.mdp, env.r_true);
    if (cfg.weighting == StateWeighting::Empirical) {
        throw InvalidArgument("eval supports uniform state weighting only; empirical weights need the dataset");
    }
    const MetricValues m =
        evaluate(truth, r + gamma * v, StateDistribution::uniform(env.mdp.n_states()), cfg.ref_action);
    std::string text = "metric,value\n";
    const auto values = as_array(m);
    for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
        text += std::string(kMetricNames[k]) + ',' + detail::format_double(values[k]) + '\n';
    }
    if (!c.out.empty()) write_text(c.out, text);
    if (!c.quiet || c.out.empty()) {
        char line[160];
        std::snprintf(line, sizeof line, "RMSE %.4f  Corr %.4f  KL %.4f  TV %.4f  Top-1 %.4f\n", m.rmse_qdiff,
                      m.corr_qdiff, m.kl, m.tv, m.top1);
        out << line;
    }
    return 0;
}

int run_reproduce(const Common& c, const std::string& name, std::optional<std::size_t> reruns,
                  std::optional<std::size_t> threads, std::ostream& out) {
    if (!name.empty() && !c.config_path.empty()) throw InvalidArgument("give either a preset name or --config, not both");
    ExperimentConfig cfg = c.config_path.empty() ? preset(name.empty() ? "ident" : name) : load_config(c.config_path);
    if (c.seed) cfg.base_seed = *c.seed;
    if (reruns) cfg.reruns = *reruns;
    if (threads) cfg.threads = *threads;
    if (cfg.reruns == 0) throw InvalidArgument("--reruns must be >= 1");
    const ExperimentResult result = run_experiment(cfg);
    const std::filesystem::path dir = c.out.empty() ? std::filesystem::path("results") / cfg.name : std::filesystem::path(c.out);
    write_experiment(dir, result);
    out << markdown_table(result);
    if (!c.quiet) {
        out << "\nwrote " << (dir / "raw.csv").string() << ", summary.csv, table.md";
        if (!result.warnings.empty()) out << ", warnings.txt (" << result.warnings.size() << " warnings)";
        out << '\n';
    }
    return 0;
}

int run_diagnose(const Common& c, const std::string& dataset_path, std::ostream& out) {
    const ExperimentConfig cfg = resolve_config(c);
    const TransitionDataset data = read_dataset(dataset_path);
    const std::uint64_t seed = c.seed.value_or(data.meta().seed);
    const Gridworld env = env_for(cfg, seed);
    check_dataset_matches(data, env);
    const PolicyTable pi = expert_policy(env.mdp, env.r_true);
    SolverConfig scfg = solver_for(cfg, env, seed);
    scfg.keep_iterates = true;
    const IrlSolution sol = solve(data, scfg, BenchmarkTruth{&env.mdp, &pi});
    const IrlSolution exact = exact_population_solver(env.mdp, pi, make_measure(scfg.mu, scfg.mu_action, pi));
    const auto& d = sol.diagnostics;

    std::ostringstream csv;
    csv << "# kappa_hat=" << detail::format_double(d.kappa_hat) << " (" << d.kappa_reference << ")"
        << " nu_proxy=" << detail::format_double(d.nu_proxy)
        << " nu_population=" << detail::format_double(d.nu_population) << " K=" << d.iterations << '\n';
    csv << "k,eta,eta_population,step_sup,error_sup,gamma_pow_k_bound\n";
    const double v_star = sup_norm(exact.v_hat);
    for (std::size_t k = 1; k <= d.iterations; ++k) {
        const double step = sup_norm(d.iterates[k] - d.iterates[k - 1]);
        const double error = sup_norm(d.iterates[k] - exact.v_hat);
        csv << k << ',' << detail::format_double(d.eta[k - 1]) << ',' << detail::format_double(d.eta_population[k - 1])
            << ',' << detail::format_double(step) << ',' << detail::format_double(error) << ','
            << detail::format_double(std::pow(scfg.gamma, static_cast<double>(k)) * v_star) << '\n';
    }
    if (c.out.empty()) {
        out << csv.str();
    } else {
        write_text(c.out, csv.str());
        if (!c.quiet) out << "wrote " << c.out << '\n';
    }
    if (!c.quiet) {
        for (const auto& w : d.warnings) out << "# warning: " << w << '\n';
    }
    return 0;
}

} // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Reward recovery from transition data by classification and iterated regression"};
    app.name("ctrirl");
    app.require_subcommand(1);

    Common common;
    std::string positional;
    std::optional<std::size_t> reruns;
    std::optional<std::size_t> threads;

    auto* gen = app.add_subcommand("gen-data", "sample expert demonstrations to a dataset file");
    add_common(gen, common);

    auto* solve_cmd = app.add_subcommand("solve", "recover (r, v) from a dataset");
    solve_cmd->add_option("dataset", positional, "dataset file")->required();
    add_common(solve_cmd, common);

    auto* base = app.add_subcommand("baseline", "fit the linear MaxEnt baseline on a dataset");
    base->add_option("dataset", positional, "dataset file")->required();
    add_common(base, common);

    auto* eval = app.add_subcommand("eval", "evaluate a solution or baseline directory against the env");
    eval->add_option("solution", positional, "directory holding r.csv, v.csv and diagnostics.json")->required();
    add_common(eval, common);

    auto* repro = app.add_subcommand("reproduce", "run seeded reruns of a built-in or custom config");
    repro->add_option("preset", positional, "easy|ident|hard");
    add_common(repro, common, false);
    repro->add_option("--reruns", reruns, "number of reruns");
    repro->add_option("--threads", threads, "worker threads (0 = all cores)");

    auto* diag = app.add_subcommand("diagnose", "per-iteration residuals, coverage and contraction data as CSV");
    diag->add_option("dataset", positional, "dataset file")->required();
    add_common(diag, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        const auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return 1;
    }

    try {
        if (gen->parsed()) return run_gen_data(common, out);
        if (solve_cmd->parsed()) return run_solve(common, positional, out);
        if (base->parsed()) return run_baseline(common, positional, out);
        if (eval->parsed()) return run_eval(common, positional, out);
        if (repro->parsed()) return run_reproduce(common, positional, reruns, threads, out);
        if (diag->parsed()) return run_diagnose(common, positional, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    err << app.help();
    return 1;
}

} // namespace ctrirl
