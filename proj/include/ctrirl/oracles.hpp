#pragma once

// Probabilistic classification and least-squares regression oracles with a
// uniform interface. The solver calls `fit_classifier` once to estimate the
// behavior policy and `fit_regressor` once per fixed-point iteration.

#include "ctrirl/dataset.hpp"
#include "ctrirl/features.hpp"
#include "ctrirl/mdp.hpp"

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ctrirl {

enum class ClassifierKind { TabularCount, MultinomialLogistic };
enum class LogisticOptimizer { Newton, GradientDescent };

struct ClassifierSpec {
    ClassifierKind kind = ClassifierKind::TabularCount;
    /// Additive smoothing for tabular counts.
    double smoothing_alpha = 0.0;

    // Multinomial logistic regression on `features`.
    std::shared_ptr<const FeatureMap> features;
    LogisticOptimizer optimizer = LogisticOptimizer::Newton;
    /// Gradient descent step; 0 picks 0.5 / (1 + Lipschitz estimate).
    double step_size = 0.0;
    std::size_t epochs = 500;
    /// Minibatch size for gradient descent; 0 means full batch.
    std::size_t batch_size = 0;
    std::uint64_t shuffle_seed = 0;
    double l2 = 1e-6;

    /// Every returned probability is at least about this large, so log pi-hat is bounded.
    double prob_floor = 1e-6;
};

struct ClassifierDiagnostics {
    double final_loss = 0.0;
    std::size_t epochs_run = 0;
    std::vector<double> loss_trace;
    /// States with no training records; their rows are uniform (tabular kind).
    std::vector<Index> unvisited_states;
};

struct FittedClassifier {
    PolicyTable probs;
    double prob_floor = 0.0;
    ClassifierDiagnostics diagnostics;
};

/// Fits pi-hat(a|s) on the (s, a) part of `data`, honoring record weights.
FittedClassifier fit_classifier(const ClassifierSpec& spec, const TransitionDataset& data);

/// log pi-hat, bounded below by log(prob_floor / 2).
StateActionFn log_policy(const FittedClassifier& classifier);

enum class RegressorKind { TabularMean, Ridge };

struct RegressorSpec {
    RegressorKind kind = RegressorKind::TabularMean;
    double ridge_lambda = 0.0;
    /// Prediction for cells with no training data (tabular kind).
    double fallback = 0.0;
    std::shared_ptr<const FeatureMap> features;
};

struct RegressionSample {
    Index s = 0;
    Index a = 0;
    double y = 0.0;
    double weight = 1.0;
};

struct RegressorDiagnostics {
    /// Weighted root-mean-square training residual.
    double train_rmse = 0.0;
    std::size_t unvisited_cells = 0;
};

struct FittedRegressor {
    RegressorKind kind = RegressorKind::TabularMean;
    Index n_states = 0;
    Index n_actions = 0;
    Matrix table;    // tabular kind
    Vector weights;  // ridge kind
    std::shared_ptr<const FeatureMap> features;
    RegressorDiagnostics diagnostics;
};

FittedRegressor fit_regressor(const RegressorSpec& spec, std::span<const RegressionSample> samples, Index n_states,
                              Index n_actions);

double predict(const FittedRegressor& model, Index s, Index a);
StateActionFn predict_table(const FittedRegressor& model);

std::string to_string(ClassifierKind k);
std::string to_string(RegressorKind k);
ClassifierKind parse_classifier_kind(std::string_view text);
RegressorKind parse_regressor_kind(std::string_view text);
LogisticOptimizer parse_logistic_optimizer(std::string_view text);

} // namespace ctrirl
