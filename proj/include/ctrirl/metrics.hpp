#pragma once

// Reward-recovery and imitation metrics: Q-difference RMSE and correlation,
// KL, total variation and top-1 agreement of the induced policy.

#include "ctrirl/mdp.hpp"

#include <array>
#include <string>
#include <vector>

namespace ctrirl {

/// f(s, a) - f(s, ref_action).
StateActionFn qdiff(const StateActionFn& q, Index ref_action = 0);

/// Ground truth for evaluation: Q of r_true by soft value iteration and the expert policy.
struct EvalTruth {
    const TabularMdp* mdp = nullptr;
    StateActionFn r_true;
    StateActionFn q_true;
    PolicyTable pi_expert;
};

EvalTruth make_truth(const TabularMdp& mdp, const StateActionFn& r_true);

struct MetricValues {
    double rmse_qdiff = 0.0;
    /// NaN when either Q-difference vector has zero variance.
    double corr_qdiff = 0.0;
    double kl = 0.0;
    double tv = 0.0;
    double top1 = 0.0;
    bool corr_defined = true;
};

inline constexpr std::array<const char*, 5> kMetricNames = {"rmse", "corr", "kl", "tv", "top1"};
inline constexpr std::array<const char*, 5> kMetricLabels = {"RMSE", "Corr", "KL", "TV", "Top-1"};

/// Values in kMetricNames order.
std::array<double, 5> as_array(const MetricValues& m);

/// Compares the estimate's Q-hat with the truth. RMSE and correlation run over
/// (s, a != ref_action) with weight w(s); KL(pi_expert || softmax Q-hat), TV
/// and top-1 (lowest-index tie-break) are averaged over states with weight w(s).
MetricValues evaluate(const EvalTruth& truth, const StateActionFn& q_hat, const StateDistribution& weighting,
                      Index ref_action = 0);

/// Index of the largest entry of each row, ties to the lowest index.
std::vector<Index> argmax_rows(const Matrix& m);

struct Summary {
    double mean = 0.0;
    /// Sample standard deviation / sqrt(count); NaN when count < 2.
    double se = 0.0;
    std::size_t count = 0;
};

/// Mean and standard error over the finite values.
Summary summarize(const std::vector<double>& values);

} // namespace ctrirl
