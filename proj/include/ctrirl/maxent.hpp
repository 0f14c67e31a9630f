#pragma once

// Linear-reward maximum-entropy IRL baseline: r_theta = <theta, phi>, fit by
// maximizing the conditional log-likelihood of the observed actions under the
// soft-optimal policy of r_theta.

#include "ctrirl/dataset.hpp"
#include "ctrirl/features.hpp"
#include "ctrirl/mdp.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ctrirl {

enum class MaxEntOptimizer { GradientAscent, Adam };
enum class StepSchedule { Constant, InverseSqrt };
enum class WeightInit { Zeros, Gaussian };

struct MaxEntConfig {
    MaxEntOptimizer optimizer = MaxEntOptimizer::GradientAscent;
    double step_size = 1.0;
    StepSchedule schedule = StepSchedule::InverseSqrt;
    /// Gradients longer than this are rescaled to this length.
    double clip_norm = 10.0;
    std::size_t max_epochs = 300;
    /// Stop after this many epochs without a loss improvement larger than `tolerance`.
    std::size_t patience = 20;
    double tolerance = 1e-9;
    double inner_tol = 1e-10;
    std::size_t inner_max_iter = 1000000;
    WeightInit init = WeightInit::Zeros;
    std::uint64_t init_seed = 0;
    double init_scale = 0.01;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
};

std::string to_string(MaxEntOptimizer o);
std::string to_string(StepSchedule s);
std::string to_string(WeightInit w);
MaxEntOptimizer parse_maxent_optimizer(std::string_view text);
StepSchedule parse_step_schedule(std::string_view text);
WeightInit parse_weight_init(std::string_view text);

struct LoglikGrad {
    /// Mean log pi_theta(a_i | s_i) over the records.
    double loglik = 0.0;
    Vector grad;
    /// Soft value of r_theta; reusable as a warm start.
    StateActionFn v;
    PolicyTable pi;
};

/// Exact gradient through the soft Bellman fixed point. With w-tilde(s, a) the
/// record frequencies minus their pi_theta-expected counterpart, the gradient
/// is Phi^T (w-tilde + gamma pi(a|s) y(s)) where y solves
/// (I - gamma M)^T y = P^T w-tilde and M is the state kernel under pi_theta.
LoglikGrad maxent_loglik_and_grad(const TabularMdp& mdp, const FeatureMap& phi, const Vector& theta,
                                  const TransitionDataset& data, double inner_tol = 1e-10,
                                  std::size_t inner_max_iter = 1000000,
                                  const std::optional<StateActionFn>& warm_start = std::nullopt);

struct MaxEntFit {
    Vector theta;
    StateActionFn r_hat;
    StateActionFn v_hat;
    /// Negative mean log-likelihood at each evaluated iterate.
    std::vector<double> loss_trace;
    /// Best loss so far at each evaluated iterate (nonincreasing).
    std::vector<double> best_trace;
    /// 1-based epoch of the returned weights; 0 when no epoch ran.
    std::size_t best_epoch = 0;
    std::size_t epochs_run = 0;
};

MaxEntFit maxent_fit(const TabularMdp& mdp, const FeatureMap& phi, const TransitionDataset& data,
                     const MaxEntConfig& cfg);

} // namespace ctrirl
