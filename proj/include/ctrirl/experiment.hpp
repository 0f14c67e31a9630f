#pragma once

// Seeded benchmark reruns: build the gridworld, sample demonstrations, run the
// solver and the MaxEnt baseline, evaluate both and aggregate.

#include "ctrirl/gridworld.hpp"
#include "ctrirl/maxent.hpp"
#include "ctrirl/metrics.hpp"
#include "ctrirl/solver.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ctrirl {

enum class StateWeighting { Uniform, Empirical };

std::string to_string(StateWeighting w);
StateWeighting parse_state_weighting(std::string_view text);

/// Which feature map an oracle uses: one-hot (s, a) indicators or the env's features.
enum class FeatureSource { OneHot, Env };

std::string to_string(FeatureSource f);
FeatureSource parse_feature_source(std::string_view text);

struct ExperimentConfig {
    std::string name = "custom";
    GridworldSpec env;
    std::size_t n = 50000;
    SamplingRegime regime = SamplingRegime::IidRestart;
    /// gamma is taken from env.gamma at run time.
    SolverConfig solver;
    FeatureSource classifier_features = FeatureSource::OneHot;
    FeatureSource regressor_features = FeatureSource::OneHot;
    bool run_baseline = true;
    MaxEntConfig baseline;
    std::size_t reruns = 20;
    std::uint64_t base_seed = 0;
    StateWeighting weighting = StateWeighting::Uniform;
    Index ref_action = 0;
    /// Worker threads; 0 uses the hardware concurrency.
    std::size_t threads = 0;
};

inline constexpr const char* kOursMethod = "Ours";
inline constexpr const char* kMaxEntMethod = "MaxEnt";

/// Seeds of the independent random streams of one rerun.
struct RerunSeeds {
    std::uint64_t rerun = 0;
    std::uint64_t env = 0;
    std::uint64_t sampler = 0;
    std::uint64_t baseline_init = 0;
    std::uint64_t split = 0;
};

/// rerun = base_seed + index; the stream seeds are drawn from std::seed_seq{rerun}.
RerunSeeds derive_seeds(std::uint64_t base_seed, std::size_t index);

struct RerunResult {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    /// Method name -> metrics, in insertion order Ours, MaxEnt.
    std::vector<std::pair<std::string, MetricValues>> metrics;
    std::vector<std::string> warnings;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<RerunResult> reruns;
    /// method -> metric -> summary over successful reruns.
    std::map<std::string, std::map<std::string, Summary>> summary;
    std::vector<std::string> warnings;

    std::vector<std::string> methods() const;
    /// Per-rerun values of one metric for one method (successful reruns only).
    std::vector<double> values(const std::string& method, const std::string& metric) const;
};

/// Materializes the solver configuration of a rerun (features, gamma, seeds).
SolverConfig solver_config_for(const ExperimentConfig& cfg, const Gridworld& env, const RerunSeeds& seeds);

/// One rerun; exceptions are caught and reported in the result.
RerunResult run_rerun(const ExperimentConfig& cfg, std::size_t index);

/// All reruns on a worker pool, results ordered by rerun index. Throws when
/// fewer than 80% of reruns succeed.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// raw.csv, summary.csv, table.md and, if there were failures, warnings.txt.
void write_experiment(const std::filesystem::path& dir, const ExperimentResult& result);

std::string raw_csv(const ExperimentResult& result);
std::string summary_csv(const ExperimentResult& result);
/// Markdown table: one row per method, columns RMSE, Corr, KL, TV, Top-1 as mean ± SE.
std::string markdown_table(const ExperimentResult& result);

// Configuration files ---------------------------------------------------------

/// Built-in configurations: "easy", "ident", "hard".
ExperimentConfig preset(std::string_view name);
std::vector<std::string> preset_names();

/// Parses an INI-style config. A top-level `preset = <name>` starts from that
/// preset; sections [env], [solver], [baseline] and [eval] override its keys.
/// Unknown sections or keys are errors.
ExperimentConfig parse_config(std::string_view text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Inverse of parse_config: every key, so the output documents the defaults.
std::string format_config(const ExperimentConfig& cfg);

} // namespace ctrirl
