#pragma once

// Reward and soft-value recovery: the exact population solver, the
// classify-then-regress estimator and its sample-splitting variant, potential
// shaping and the normalization check.

#include "ctrirl/dataset.hpp"
#include "ctrirl/mdp.hpp"
#include "ctrirl/oracles.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ctrirl {

enum class MeasureKind { PointMass, Uniform, BehaviorPolicy };

/// Reference measure mu with mu r = 0.
struct NormalizationMeasure {
    MeasureKind kind = MeasureKind::Uniform;
    /// Reference action for the point-mass kind.
    Index ref_action = 0;
    PolicyTable realized;

    static NormalizationMeasure point_mass(Index n_states, Index n_actions, Index action);
    static NormalizationMeasure uniform(Index n_states, Index n_actions);
    static NormalizationMeasure behavior(const PolicyTable& pi);
};

std::string to_string(MeasureKind k);
MeasureKind parse_measure_kind(std::string_view text);

/// Builds the realized measure of `kind` for the given shape. The
/// behavior-policy kind takes its table from `behavior`.
NormalizationMeasure make_measure(MeasureKind kind, Index ref_action, const PolicyTable& behavior);

struct SolverConfig {
    double gamma = 0.97;
    /// Number of regression iterations; empty means auto.
    std::optional<std::size_t> K;
    MeasureKind mu = MeasureKind::Uniform;
    Index mu_action = 0;
    ClassifierSpec classifier;
    RegressorSpec regressor;
    /// Sample-splitting variant (separate classification half, one fold per iteration).
    bool split = false;
    /// Number of regression folds for the split variant; 0 means one per iteration.
    /// With fewer folds than iterations the folds are reused cyclically.
    std::size_t folds = 0;
    std::uint64_t split_seed = 0;
    /// Keep every v-hat iterate in the diagnostics.
    bool keep_iterates = false;
};

/// max(1, ceil(ln n / ln(1/gamma))), capped at 500.
std::size_t auto_iterations(std::size_t n, double gamma);

/// The data-generating MDP and policy, when known. Enables the population
/// diagnostics and makes the behavior-policy measure use pi instead of pi-hat.
struct BenchmarkTruth {
    const TabularMdp* mdp = nullptr;
    const PolicyTable* pi = nullptr;
};

struct SolverDiagnostics {
    std::size_t iterations = 0;
    /// Root-mean-square training residual of each regression fit.
    std::vector<double> eta;
    /// Population residual |v^(k) - T_u v^(k-1)| in the empirical (s, a) L2 norm (benchmark mode).
    std::vector<double> eta_population;
    /// Regression cells with no data, per iteration.
    std::vector<std::size_t> unvisited_cells;
    /// Empirical conditional KL(data || pi-hat) on the classification data.
    double nu_proxy = 0.0;
    /// |u-hat - log pi| in the empirical (s, a) L2 norm (benchmark mode, NaN otherwise).
    double nu_population = std::numeric_limits<double>::quiet_NaN();
    /// max over (s, a) of lambda(s) mu(a|s) / P-hat(s, a); infinite on a coverage gap.
    double kappa_hat = 0.0;
    std::string kappa_reference;
    std::size_t n_classify = 0;
    std::size_t n_regress = 0;
    std::size_t fold_size = 0;
    ClassifierDiagnostics classifier;
    std::vector<std::string> warnings;
    std::vector<StateActionFn> iterates;
};

struct IrlSolution {
    StateActionFn r_hat;
    StateActionFn v_hat;
    StateActionFn u_hat;
    StateFn c_hat;
    PolicyTable mu;
    double gamma = 0.0;
    SolverDiagnostics diagnostics;
};

/// T_u v = P mu (gamma v - u).
StateActionFn t_u_apply(const TabularMdp& mdp, const PolicyTable& mu, const StateActionFn& u, const StateActionFn& v);

/// Solves (I - gamma mu P) c = -mu u with u = log pi, then v = P c and
/// r = u + c - gamma v.
IrlSolution exact_population_solver(const TabularMdp& mdp, const PolicyTable& pi, const NormalizationMeasure& mu);

IrlSolution classify_then_regress(const TransitionDataset& data, const SolverConfig& cfg,
                                  const BenchmarkTruth& truth = {});
IrlSolution split_classify_regress(const TransitionDataset& data, const SolverConfig& cfg,
                                   const BenchmarkTruth& truth = {});
/// Dispatches on cfg.split.
IrlSolution solve(const TransitionDataset& data, const SolverConfig& cfg, const BenchmarkTruth& truth = {});

struct Shaped {
    StateActionFn r;
    StateActionFn v;
};

/// (r + c - gamma P c, v + P c).
Shaped shape(const StateActionFn& r, const StateActionFn& v, const StateFn& c, const TabularMdp& mdp);

/// max_s |sum_a mu(a|s) r(s, a)|.
double check_normalization(const StateActionFn& r, const PolicyTable& mu);

/// Q-hat = r-hat + gamma v-hat.
StateActionFn q_hat(const IrlSolution& solution);

/// Writes r.csv, v.csv, u.csv, c.csv and diagnostics.json into `dir`.
/// `meta` entries are added to the top level of diagnostics.json.
void write_solution(const std::filesystem::path& dir, const IrlSolution& solution,
                    const std::vector<std::pair<std::string, std::string>>& meta = {});

/// Reads the tables back; diagnostics other than gamma are not restored.
IrlSolution read_solution(const std::filesystem::path& dir);

/// Dense table CSV: header `s,0,1,...`, one row `s,f(s,0),...` per state.
void write_table(const std::filesystem::path& path, const StateActionFn& f);
StateActionFn read_table(const std::filesystem::path& path);

} // namespace ctrirl
