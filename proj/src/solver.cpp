#include "ctrirl/solver.hpp"

#include "ctrirl/error.hpp"
#include "text_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace ctrirl {

NormalizationMeasure NormalizationMeasure::point_mass(Index n_states, Index n_actions, Index action) {
    if (action < 0 || action >= n_actions) throw InvalidArgument("point-mass measure: reference action out of range");
    return {MeasureKind::PointMass, action, PolicyTable::point_mass(n_states, n_actions, action)};
}

NormalizationMeasure NormalizationMeasure::uniform(Index n_states, Index n_actions) {
    return {MeasureKind::Uniform, 0, PolicyTable::uniform(n_states, n_actions)};
}

NormalizationMeasure NormalizationMeasure::behavior(const PolicyTable& pi) {
    return {MeasureKind::BehaviorPolicy, 0, pi};
}

std::string to_string(MeasureKind k) {
    switch (k) {
    case MeasureKind::PointMass: return "point-mass";
    case MeasureKind::Uniform: return "uniform";
    case MeasureKind::BehaviorPolicy: return "behavior-policy";
    }
    return "unknown";
}

MeasureKind parse_measure_kind(std::string_view text) {
    if (text == "point-mass") return MeasureKind::PointMass;
    if (text == "uniform") return MeasureKind::Uniform;
    if (text == "behavior-policy") return MeasureKind::BehaviorPolicy;
    throw InvalidArgument("unknown normalization measure '" + std::string(text) +
                          "' (point-mass|uniform|behavior-policy)");
}

NormalizationMeasure make_measure(MeasureKind kind, Index ref_action, const PolicyTable& behavior) {
    switch (kind) {
    case MeasureKind::PointMass:
        return NormalizationMeasure::point_mass(behavior.n_states(), behavior.n_actions(), ref_action);
    case MeasureKind::Uniform: return NormalizationMeasure::uniform(behavior.n_states(), behavior.n_actions());
    case MeasureKind::BehaviorPolicy: return NormalizationMeasure::behavior(behavior);
    }
    throw InvalidArgument("make_measure: unknown kind");
}

std::size_t auto_iterations(std::size_t n, double gamma) {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidArgument("auto_iterations: gamma must lie in [0, 1)");
    if (gamma == 0.0 || n <= 1) return 1;
    const double k = std::ceil(std::log(static_cast<double>(n)) / std::log(1.0 / gamma));
    return static_cast<std::size_t>(std::clamp(k, 1.0, 500.0));
}

StateActionFn t_u_apply(const TabularMdp& mdp, const PolicyTable& mu, const StateActionFn& u, const StateActionFn& v) {
    require_shape(mdp, u, "t_u_apply: u");
    require_shape(mdp, v, "t_u_apply: v");
    return apply_p(mdp, expect_mu(mu, mdp.gamma() * v - u));
}

namespace {

void require_measure(const TabularMdp& mdp, const PolicyTable& mu) {
    if (mu.n_states() != mdp.n_states() || mu.n_actions() != mdp.n_actions()) {
        throw ShapeError("normalization measure shape differs from MDP");
    }
}

// r = u + c(s) - gamma v with c = mu(gamma v - u): the closed-form return line.
// Grouped as (u - mu u) - (gamma v - mu gamma v) so a point-mass reference
// column comes out exactly zero.
void finish(IrlSolution& sol) {
    const StateActionFn gv = sol.gamma * sol.v_hat;
    const StateFn mu_u = expect_mu(sol.mu, sol.u_hat);
    const StateFn mu_gv = expect_mu(sol.mu, gv);
    sol.c_hat = mu_gv - mu_u;
    sol.r_hat = add_state(sol.u_hat, -1.0 * mu_u) - add_state(gv, -1.0 * mu_gv);
}

double empirical_kl(const Matrix& counts, const PolicyTable& pi_hat) {
    const double total = counts.sum();
    double kl = 0.0;
    for (Index s = 0; s < counts.rows(); ++s) {
        const double ns = counts.row(s).sum();
        if (ns <= 0.0) continue;
        for (Index a = 0; a < counts.cols(); ++a) {
            if (counts(s, a) <= 0.0) continue;
            const double p = counts(s, a) / ns;
            kl += ns / total * p * std::log(p / pi_hat(s, a));
        }
    }
    return kl;
}

void coverage_diagnostics(SolverDiagnostics& diag, const TransitionDataset& reg_data, const PolicyTable& mu,
                          const BenchmarkTruth& truth) {
    const OccupancyMeasure occ = empirical_occupancy(reg_data);
    StateDistribution lambda;
    diag.kappa_reference = "empirical-state-marginal";
    lambda = occ.state_marginal();
    if (truth.mdp != nullptr) {
        try {
            lambda = stationary_distribution(*truth.mdp, mu);
            diag.kappa_reference = "stationary";
        } catch (const ConvergenceError&) {
            diag.warnings.push_back("kappa_hat: no stationary distribution under mu; using the empirical state marginal");
        }
    }
    double kappa = 0.0;
    std::size_t gaps = 0;
    for (Index s = 0; s < occ.n_states(); ++s) {
        for (Index a = 0; a < occ.n_actions(); ++a) {
            const double target = lambda[s] * mu(s, a);
            if (target <= 0.0) continue;
            if (occ(s, a) <= 0.0) {
                ++gaps;
                continue;
            }
            kappa = std::max(kappa, target / occ(s, a));
        }
    }
    if (gaps > 0) {
        kappa = std::numeric_limits<double>::infinity();
        diag.warnings.push_back("kappa_hat is infinite: " + std::to_string(gaps) +
                                " (s, a) cells charged by lambda x mu have no data");
    }
    diag.kappa_hat = kappa;
}

struct FoldSamples {
    std::vector<Transition> records;
    std::vector<double> weights;
    OccupancyMeasure occupancy;
};

FoldSamples make_fold(const TransitionDataset& data) {
    const TransitionDataset packed = data.compressed();
    return {packed.records(),
            [&] {
                std::vector<double> w(packed.size());
                for (std::size_t i = 0; i < packed.size(); ++i) w[i] = packed.weight(i);
                return w;
            }(),
            empirical_occupancy(packed)};
}

// The shared regression loop: v^(k) = Regress(mu(gamma v^(k-1) - u)(s') on (s, a)) with fold k % folds.
void regression_loop(IrlSolution& sol, const std::vector<FoldSamples>& folds, std::size_t K, const SolverConfig& cfg,
                     const BenchmarkTruth& truth) {
    const Index S = sol.u_hat.n_states();
    const Index A = sol.u_hat.n_actions();
    auto& diag = sol.diagnostics;
    sol.v_hat = StateActionFn(S, A);
    if (cfg.keep_iterates) diag.iterates.push_back(sol.v_hat);

    std::vector<RegressionSample> samples;
    std::size_t folds_with_gaps = 0;
    for (std::size_t k = 1; k <= K; ++k) {
        const FoldSamples& fold = folds[(k - 1) % folds.size()];
        const StateFn target = expect_mu(sol.mu, sol.gamma * sol.v_hat - sol.u_hat);
        samples.clear();
        for (std::size_t i = 0; i < fold.records.size(); ++i) {
            const auto& t = fold.records[i];
            samples.push_back({t.s, t.a, target[t.next], fold.weights[i]});
        }
        FittedRegressor model;
        try {
            model = fit_regressor(cfg.regressor, samples, S, A);
        } catch (const Error& e) {
            throw Error("regression iteration " + std::to_string(k) + ": " + e.what());
        }
        StateActionFn next = predict_table(model);
        diag.eta.push_back(model.diagnostics.train_rmse);
        diag.unvisited_cells.push_back(model.diagnostics.unvisited_cells);
        if (model.diagnostics.unvisited_cells > 0 && k <= folds.size()) ++folds_with_gaps;
        if (truth.mdp != nullptr) {
            const StateActionFn exact = apply_p(*truth.mdp, target);
            diag.eta_population.push_back(l2_norm(next - exact, fold.occupancy));
        }
        sol.v_hat = std::move(next);
        if (cfg.keep_iterates) diag.iterates.push_back(sol.v_hat);
        ++diag.iterations;
    }
    if (folds_with_gaps > 0) {
        diag.warnings.push_back("coverage: " + std::to_string(folds_with_gaps) +
                                " regression fold(s) leave (s, a) cells without data; those cells use the fallback " +
                                detail::format_double(cfg.regressor.fallback));
    }
}

void check_config(const SolverConfig& cfg, const TransitionDataset& data) {
    if (!(cfg.gamma >= 0.0 && cfg.gamma < 1.0)) throw InvalidArgument("solver: gamma must lie in [0, 1)");
    if (data.empty()) throw InvalidArgument("solver: empty dataset");
}

IrlSolution start_solution(const TransitionDataset& cls_data, const SolverConfig& cfg, const BenchmarkTruth& truth) {
    IrlSolution sol;
    sol.gamma = cfg.gamma;
    FittedClassifier classifier = fit_classifier(cfg.classifier, cls_data);
    sol.u_hat = log_policy(classifier);
    sol.diagnostics.nu_proxy = empirical_kl(count_table(cls_data), classifier.probs);
    const PolicyTable& behavior = (truth.pi != nullptr) ? *truth.pi : classifier.probs;
    if (truth.pi != nullptr && (truth.pi->n_states() != sol.u_hat.n_states() ||
                                truth.pi->n_actions() != sol.u_hat.n_actions())) {
        throw ShapeError("solver: benchmark policy shape differs from the dataset");
    }
    sol.mu = make_measure(cfg.mu, cfg.mu_action, behavior).realized;
    if (truth.pi != nullptr) {
        sol.diagnostics.nu_population = l2_norm(sol.u_hat - truth.pi->log(), empirical_occupancy(cls_data));
    }
    if (!classifier.diagnostics.unvisited_states.empty()) {
        sol.diagnostics.warnings.push_back("classifier: " + std::to_string(classifier.diagnostics.unvisited_states.size()) +
                                           " state(s) absent from the classification data");
    }
    sol.diagnostics.classifier = std::move(classifier.diagnostics);
    sol.diagnostics.n_classify = cls_data.size();
    return sol;
}

} // namespace

IrlSolution exact_population_solver(const TabularMdp& mdp, const PolicyTable& pi, const NormalizationMeasure& mu) {
    if (pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions()) {
        throw ShapeError("exact_population_solver: policy shape differs from MDP");
    }
    require_measure(mdp, mu.realized);
    if ((pi.probs().array() <= 0.0).any()) {
        throw InvalidArgument("exact_population_solver: policy has zero entries; floor it so log pi is finite");
    }
    IrlSolution sol;
    sol.gamma = mdp.gamma();
    sol.mu = mu.realized;
    sol.u_hat = pi.log();
    const Index S = mdp.n_states();
    const Matrix system = Matrix::Identity(S, S) - mdp.gamma() * state_kernel(mdp, mu.realized);
    const Vector rhs = -expect_mu(mu.realized, sol.u_hat).values();
    sol.v_hat = apply_p(mdp, StateFn(Vector(system.partialPivLu().solve(rhs))));
    finish(sol);  // c recomputed from v; equal to the solve up to rounding
    return sol;
}

IrlSolution classify_then_regress(const TransitionDataset& data, const SolverConfig& cfg, const BenchmarkTruth& truth) {
    check_config(cfg, data);
    const std::size_t K = cfg.K.value_or(auto_iterations(data.size(), cfg.gamma));
    IrlSolution sol = start_solution(data, cfg, truth);
    std::vector<FoldSamples> folds{make_fold(data)};
    sol.diagnostics.n_regress = data.size();
    sol.diagnostics.fold_size = data.size();
    coverage_diagnostics(sol.diagnostics, data, sol.mu, truth);
    regression_loop(sol, folds, K, cfg, truth);
    finish(sol);
    return sol;
}

IrlSolution split_classify_regress(const TransitionDataset& data, const SolverConfig& cfg, const BenchmarkTruth& truth) {
    check_config(cfg, data);
    const std::size_t n = data.size();
    const std::size_t K = cfg.K.value_or(auto_iterations(n, cfg.gamma));
    const std::size_t n_folds = cfg.folds == 0 ? std::max<std::size_t>(K, 1) : cfg.folds;
    if (n_folds > n / 2) {
        throw InvalidArgument("split_classify_regress: " + std::to_string(n_folds) + " folds need at least " +
                              std::to_string(2 * n_folds) + " records, got " + std::to_string(n));
    }
    const std::size_t fold_size = n / (2 * n_folds);
    if (fold_size == 0) throw InvalidArgument("split_classify_regress: fold size is zero");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(cfg.split_seed);
    std::shuffle(order.begin(), order.end(), rng);

    const std::size_t half = n / 2;
    const TransitionDataset cls_data = data.select({order.begin(), order.begin() + static_cast<std::ptrdiff_t>(half)});
    IrlSolution sol = start_solution(cls_data, cfg, truth);

    std::vector<FoldSamples> folds;
    std::vector<std::size_t> reg_positions;
    for (std::size_t f = 0; f < n_folds; ++f) {
        const auto begin = order.begin() + static_cast<std::ptrdiff_t>(half + f * fold_size);
        std::vector<std::size_t> positions(begin, begin + static_cast<std::ptrdiff_t>(fold_size));
        reg_positions.insert(reg_positions.end(), positions.begin(), positions.end());
        folds.push_back(make_fold(data.select(positions)));
    }
    sol.diagnostics.n_regress = reg_positions.size();
    sol.diagnostics.fold_size = fold_size;
    coverage_diagnostics(sol.diagnostics, data.select(reg_positions), sol.mu, truth);
    regression_loop(sol, folds, K, cfg, truth);
    finish(sol);
    return sol;
}

IrlSolution solve(const TransitionDataset& data, const SolverConfig& cfg, const BenchmarkTruth& truth) {
    return cfg.split ? split_classify_regress(data, cfg, truth) : classify_then_regress(data, cfg, truth);
}

Shaped shape(const StateActionFn& r, const StateActionFn& v, const StateFn& c, const TabularMdp& mdp) {
    require_shape(mdp, r, "shape: r");
    require_shape(mdp, v, "shape: v");
    if (c.size() != mdp.n_states()) throw ShapeError("shape: potential size differs from MDP");
    const StateActionFn pc = apply_p(mdp, c);
    return {add_state(r, c) - mdp.gamma() * pc, v + pc};
}

double check_normalization(const StateActionFn& r, const PolicyTable& mu) {
    return sup_norm(expect_mu(mu, r));
}

StateActionFn q_hat(const IrlSolution& solution) { return solution.r_hat + solution.gamma * solution.v_hat; }

// ---------------------------------------------------------------------------

void write_table(const std::filesystem::path& path, const StateActionFn& f) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << 's';
    for (Index a = 0; a < f.n_actions(); ++a) out << ',' << a;
    out << '\n';
    for (Index s = 0; s < f.n_states(); ++s) {
        out << s;
        for (Index a = 0; a < f.n_actions(); ++a) out << ',' << detail::format_double(f(s, a));
        out << '\n';
    }
    if (!out) throw Error("write failed for " + path.string());
}

namespace {

std::vector<std::vector<double>> read_rows(const std::filesystem::path& path, std::size_t& header_columns) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path.string() + ": missing header", 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = detail::split_commas(line);
    if (header.empty() || header[0] != "s") throw ParseError(path.string() + ": header must start with 's'", 1);
    header_columns = header.size();
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = detail::split_commas(line);
        if (fields.size() != header_columns) {
            throw ParseError(path.string() + ": expected " + std::to_string(header_columns) + " fields", lineno);
        }
        if (detail::parse_double(fields[0], lineno) != static_cast<double>(rows.size())) {
            throw ParseError(path.string() + ": state indices must run 0, 1, ...", lineno);
        }
        std::vector<double> values;
        for (std::size_t i = 1; i < fields.size(); ++i) values.push_back(detail::parse_double(fields[i], lineno));
        rows.push_back(std::move(values));
    }
    return rows;
}

} // namespace

StateActionFn read_table(const std::filesystem::path& path) {
    std::size_t columns = 0;
    const auto rows = read_rows(path, columns);
    if (rows.empty() || columns < 2) throw ParseError(path.string() + ": empty table", 0);
    StateActionFn f(static_cast<Index>(rows.size()), static_cast<Index>(columns - 1));
    for (std::size_t s = 0; s < rows.size(); ++s) {
        for (std::size_t a = 0; a < rows[s].size(); ++a) f(static_cast<Index>(s), static_cast<Index>(a)) = rows[s][a];
    }
    return f;
}

namespace {

nlohmann::json finite_or_string(double x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return "nan";
    return x > 0 ? "inf" : "-inf";
}

} // namespace

void write_solution(const std::filesystem::path& dir, const IrlSolution& solution,
                    const std::vector<std::pair<std::string, std::string>>& meta) {
    std::filesystem::create_directories(dir);
    write_table(dir / "r.csv", solution.r_hat);
    write_table(dir / "v.csv", solution.v_hat);
    write_table(dir / "u.csv", solution.u_hat);
    {
        std::ofstream out(dir / "c.csv", std::ios::binary);
        if (!out) throw Error("cannot open " + (dir / "c.csv").string() + " for writing");
        out << "s,c\n";
        for (Index s = 0; s < solution.c_hat.size(); ++s) {
            out << s << ',' << detail::format_double(solution.c_hat[s]) << '\n';
        }
    }
    const auto& d = solution.diagnostics;
    nlohmann::ordered_json j;
    for (const auto& [key, value] : meta) j[key] = value;
    j["gamma"] = solution.gamma;
    j["iterations"] = d.iterations;
    j["normalization_residual"] = check_normalization(solution.r_hat, solution.mu);
    j["n_classify"] = d.n_classify;
    j["n_regress"] = d.n_regress;
    j["fold_size"] = d.fold_size;
    j["nu_proxy"] = finite_or_string(d.nu_proxy);
    j["nu_population"] = finite_or_string(d.nu_population);
    j["kappa_hat"] = finite_or_string(d.kappa_hat);
    j["kappa_reference"] = d.kappa_reference;
    j["classifier_final_loss"] = finite_or_string(d.classifier.final_loss);
    j["classifier_epochs"] = d.classifier.epochs_run;
    j["classifier_unvisited_states"] = d.classifier.unvisited_states;
    nlohmann::json eta = nlohmann::json::array();
    for (double e : d.eta) eta.push_back(finite_or_string(e));
    j["eta"] = eta;
    nlohmann::json eta_pop = nlohmann::json::array();
    for (double e : d.eta_population) eta_pop.push_back(finite_or_string(e));
    j["eta_population"] = eta_pop;
    j["unvisited_cells"] = d.unvisited_cells;
    j["warnings"] = d.warnings;
    std::ofstream out(dir / "diagnostics.json", std::ios::binary);
    if (!out) throw Error("cannot open " + (dir / "diagnostics.json").string() + " for writing");
    out << j.dump(2) << '\n';
}

IrlSolution read_solution(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw Error("solution directory not found: " + dir.string());
    IrlSolution sol;
    sol.r_hat = read_table(dir / "r.csv");
    sol.v_hat = read_table(dir / "v.csv");
    sol.u_hat = read_table(dir / "u.csv");
    if (sol.v_hat.n_states() != sol.r_hat.n_states() || sol.v_hat.n_actions() != sol.r_hat.n_actions()) {
        throw ShapeError("read_solution: r.csv and v.csv shapes differ");
    }
    std::size_t columns = 0;
    const auto c_rows = read_rows(dir / "c.csv", columns);
    if (columns != 2) throw ParseError((dir / "c.csv").string() + ": expected header 's,c'", 1);
    sol.c_hat = StateFn(static_cast<Index>(c_rows.size()));
    for (std::size_t s = 0; s < c_rows.size(); ++s) sol.c_hat[static_cast<Index>(s)] = c_rows[s][0];

    std::ifstream in(dir / "diagnostics.json");
    if (!in) throw Error("cannot open " + (dir / "diagnostics.json").string());
    nlohmann::json j;
    try {
        in >> j;
        sol.gamma = j.at("gamma").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError((dir / "diagnostics.json").string() + ": " + e.what(), 0);
    }
    return sol;
}

} // namespace ctrirl
