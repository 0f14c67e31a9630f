#include "ctrirl/experiment.hpp"

#include "ctrirl/error.hpp"
#include "text_io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <thread>

namespace ctrirl {

std::string to_string(StateWeighting w) { return w == StateWeighting::Uniform ? "uniform" : "empirical"; }

StateWeighting parse_state_weighting(std::string_view text) {
    if (text == "uniform") return StateWeighting::Uniform;
    if (text == "empirical") return StateWeighting::Empirical;
    throw InvalidArgument("unknown state weighting '" + std::string(text) + "' (uniform|empirical)");
}

std::string to_string(FeatureSource f) { return f == FeatureSource::OneHot ? "one-hot" : "env"; }

FeatureSource parse_feature_source(std::string_view text) {
    if (text == "one-hot") return FeatureSource::OneHot;
    if (text == "env") return FeatureSource::Env;
    throw InvalidArgument("unknown feature source '" + std::string(text) + "' (one-hot|env)");
}

RerunSeeds derive_seeds(std::uint64_t base_seed, std::size_t index) {
    RerunSeeds seeds;
    seeds.rerun = base_seed + index;
    std::seed_seq seq{static_cast<std::uint32_t>(seeds.rerun), static_cast<std::uint32_t>(seeds.rerun >> 32)};
    std::array<std::uint32_t, 8> words{};
    seq.generate(words.begin(), words.end());
    auto join = [&](std::size_t i) { return (static_cast<std::uint64_t>(words[2 * i]) << 32) | words[2 * i + 1]; };
    seeds.env = join(0);
    seeds.sampler = join(1);
    seeds.baseline_init = join(2);
    seeds.split = join(3);
    return seeds;
}

std::vector<std::string> ExperimentResult::methods() const {
    std::vector<std::string> out;
    for (const auto& run : reruns) {
        for (const auto& [method, m] : run.metrics) {
            if (std::find(out.begin(), out.end(), method) == out.end()) out.push_back(method);
        }
    }
    return out;
}

std::vector<double> ExperimentResult::values(const std::string& method, const std::string& metric) const {
    const auto it = std::find(kMetricNames.begin(), kMetricNames.end(), metric);
    if (it == kMetricNames.end()) throw InvalidArgument("unknown metric '" + metric + "'");
    const auto column = static_cast<std::size_t>(it - kMetricNames.begin());
    std::vector<double> out;
    for (const auto& run : reruns) {
        if (!run.ok) continue;
        for (const auto& [name, m] : run.metrics) {
            if (name == method) out.push_back(as_array(m)[column]);
        }
    }
    return out;
}

namespace {

std::shared_ptr<const FeatureMap> feature_map(FeatureSource source, const Gridworld& env) {
    if (source == FeatureSource::OneHot) {
        return std::make_shared<const FeatureMap>(FeatureMap::one_hot(env.mdp.n_states(), env.mdp.n_actions()));
    }
    return std::make_shared<const FeatureMap>(env.features);
}

} // namespace

SolverConfig solver_config_for(const ExperimentConfig& cfg, const Gridworld& env, const RerunSeeds& seeds) {
    SolverConfig out = cfg.solver;
    out.gamma = env.mdp.gamma();
    out.split_seed = seeds.split;
    if (out.classifier.kind == ClassifierKind::MultinomialLogistic) {
        out.classifier.features = feature_map(cfg.classifier_features, env);
    }
    if (out.regressor.kind == RegressorKind::Ridge) out.regressor.features = feature_map(cfg.regressor_features, env);
    return out;
}

RerunResult run_rerun(const ExperimentConfig& cfg, std::size_t index) {
    RerunResult result;
    result.index = index;
    const RerunSeeds seeds = derive_seeds(cfg.base_seed, index);
    result.seed = seeds.rerun;
    try {
        GridworldSpec spec = cfg.env;
        spec.seed = seeds.env;
        const Gridworld env = build_env(spec);
        const EvalTruth truth = make_truth(env.mdp, env.r_true);
        const TransitionDataset data =
            sample_transitions(env.mdp, truth.pi_expert, cfg.n, StateDistribution::uniform(env.mdp.n_states()),
                               cfg.regime, seeds.sampler, env_id(spec));
        const StateDistribution weighting = cfg.weighting == StateWeighting::Uniform
                                                ? StateDistribution::uniform(env.mdp.n_states())
                                                : empirical_occupancy(data).state_marginal();

        const SolverConfig scfg = solver_config_for(cfg, env, seeds);
        const IrlSolution sol = solve(data, scfg, BenchmarkTruth{&env.mdp, &truth.pi_expert});
        result.metrics.emplace_back(kOursMethod, evaluate(truth, q_hat(sol), weighting, cfg.ref_action));
        for (const auto& w : sol.diagnostics.warnings) result.warnings.push_back(std::string(kOursMethod) + ": " + w);

        if (cfg.run_baseline) {
            MaxEntConfig bcfg = cfg.baseline;
            bcfg.init_seed = seeds.baseline_init;
            const MaxEntFit fit = maxent_fit(env.mdp, env.features, data, bcfg);
            const StateActionFn q = fit.r_hat + env.mdp.gamma() * fit.v_hat;
            result.metrics.emplace_back(kMaxEntMethod, evaluate(truth, q, weighting, cfg.ref_action));
        }
        for (const auto& [method, m] : result.metrics) {
            if (!m.corr_defined) result.warnings.push_back(method + ": Q-difference correlation undefined (zero variance)");
        }
        result.ok = true;
    } catch (const std::exception& e) {
        result.ok = false;
        result.error = e.what();
        result.metrics.clear();
    }
    return result;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    if (cfg.reruns == 0) throw InvalidArgument("run_experiment: reruns must be >= 1");
    ExperimentResult result;
    result.config = cfg;
    result.reruns.resize(cfg.reruns);

    std::size_t threads = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.threads;
    threads = std::min(threads, cfg.reruns);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cfg.reruns; i = next++) result.reruns[i] = run_rerun(cfg, i);
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::size_t ok = 0;
    for (const auto& run : result.reruns) {
        if (run.ok) {
            ++ok;
        } else {
            result.warnings.push_back("rerun " + std::to_string(run.index) + " (seed " + std::to_string(run.seed) +
                                      ") failed and was excluded: " + run.error);
        }
        for (const auto& w : run.warnings) {
            result.warnings.push_back("rerun " + std::to_string(run.index) + ": " + w);
        }
    }
    if (5 * ok < 4 * cfg.reruns) {
        std::string first = result.reruns.empty() ? "" : result.reruns.front().error;
        for (const auto& run : result.reruns) {
            if (!run.ok) {
                first = run.error;
                break;
            }
        }
        throw Error("run_experiment: only " + std::to_string(ok) + " of " + std::to_string(cfg.reruns) +
                    " reruns succeeded (80% required); first failure: " + first);
    }
    for (const auto& method : result.methods()) {
        for (const char* metric : kMetricNames) result.summary[method][metric] = summarize(result.values(method, metric));
    }
    return result;
}

std::string raw_csv(const ExperimentResult& result) {
    std::ostringstream out;
    out << "rerun,seed,method,metric,value\n";
    for (const auto& run : result.reruns) {
        if (!run.ok) continue;
        for (const auto& [method, m] : run.metrics) {
            const auto values = as_array(m);
            for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
                out << run.index << ',' << run.seed << ',' << method << ',' << kMetricNames[k] << ','
                    << detail::format_double(values[k]) << '\n';
            }
        }
    }
    return out.str();
}

std::string summary_csv(const ExperimentResult& result) {
    std::ostringstream out;
    out << "method,metric,mean,se,count\n";
    for (const auto& method : result.methods()) {
        for (const char* metric : kMetricNames) {
            const Summary& s = result.summary.at(method).at(metric);
            out << method << ',' << metric << ',' << detail::format_double(s.mean) << ','
                << detail::format_double(s.se) << ',' << s.count << '\n';
        }
    }
    return out.str();
}

namespace {

std::string cell(const Summary& s) {
    char buf[64];
    if (std::isnan(s.se)) {
        std::snprintf(buf, sizeof buf, "%.4f", s.mean);
    } else {
        std::snprintf(buf, sizeof buf, "%.4f ± %.4f", s.mean, s.se);
    }
    return buf;
}

} // namespace

std::string markdown_table(const ExperimentResult& result) {
    const auto& cfg = result.config;
    std::size_t ok = 0;
    for (const auto& run : result.reruns) ok += run.ok ? 1 : 0;
    std::ostringstream out;
    out << "### " << cfg.name << " (" << env_id(cfg.env) << ", n=" << cfg.n << ", reruns=" << ok << "/"
        << cfg.reruns << ", base seed " << cfg.base_seed << ")\n\n";
    out << "| Method |";
    for (const char* label : kMetricLabels) out << ' ' << label << " |";
    out << "\n|---|";
    for (std::size_t k = 0; k < kMetricLabels.size(); ++k) out << "---|";
    out << '\n';
    for (const auto& method : result.methods()) {
        out << "| " << method << " |";
        for (const char* metric : kMetricNames) out << ' ' << cell(result.summary.at(method).at(metric)) << " |";
        out << '\n';
    }
    out << "\nRMSE and Corr compare Q(s,a) - Q(s," << cfg.ref_action << ") over a != " << cfg.ref_action
        << "; KL, TV and Top-1 use " << to_string(cfg.weighting) << " state weights.\n";
    return out.str();
}

void write_experiment(const std::filesystem::path& dir, const ExperimentResult& result) {
    std::filesystem::create_directories(dir);
    auto write = [&](const char* name, const std::string& text) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw Error("cannot open " + (dir / name).string() + " for writing");
        out << text;
        if (!out) throw Error("write failed for " + (dir / name).string());
    };
    write("raw.csv", raw_csv(result));
    write("summary.csv", summary_csv(result));
    write("table.md", markdown_table(result));
    write("config.ini", format_config(result.config));
    std::error_code ec;
    std::filesystem::remove(dir / "warnings.txt", ec);
    if (!result.warnings.empty()) {
        std::string text;
        for (const auto& w : result.warnings) text += w + '\n';
        write("warnings.txt", text);
    }
}

} // namespace ctrirl
