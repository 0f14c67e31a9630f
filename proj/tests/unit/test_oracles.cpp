#include "ctrirl/error.hpp"
#include "ctrirl/gridworld.hpp"
#include "ctrirl/oracles.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <memory>

using namespace ctrirl;
using ctrirl::testing::Gen;

namespace {

TransitionDataset toy(Index S, Index A, const std::vector<std::pair<Index, Index>>& pairs) {
    std::vector<Transition> recs;
    for (auto [s, a] : pairs) recs.push_back({s, a, 0});
    return TransitionDataset({"toy", 0, S, A}, recs);
}

double mean_kl(const PolicyTable& p, const PolicyTable& q) {
    double total = 0.0;
    for (Index s = 0; s < p.n_states(); ++s) {
        for (Index a = 0; a < p.n_actions(); ++a) total += p(s, a) * std::log(p(s, a) / q(s, a));
    }
    return total / static_cast<double>(p.n_states());
}

TransitionDataset draw(const PolicyTable& pi, std::size_t n, std::uint64_t seed) {
    // Plain iid (s uniform, a ~ pi) draws, independent of the library sampler.
    Gen g(seed);
    std::vector<Transition> recs;
    for (std::size_t i = 0; i < n; ++i) {
        const Index s = g.integer(0, pi.n_states() - 1);
        double u = g.uniform(), acc = 0.0;
        Index a = pi.n_actions() - 1;
        for (Index b = 0; b < pi.n_actions(); ++b) {
            acc += pi(s, b);
            if (u < acc) {
                a = b;
                break;
            }
        }
        recs.push_back({s, a, s});
    }
    return TransitionDataset({"toy", seed, pi.n_states(), pi.n_actions()}, recs);
}

} // namespace

TEST(TabularClassifier, EmpiricalFrequency) {
    ClassifierSpec spec;
    spec.prob_floor = 1e-12;
    const FittedClassifier c = fit_classifier(spec, toy(1, 2, {{0, 0}, {0, 0}, {0, 1}}));
    EXPECT_NEAR(c.probs(0, 0), 2.0 / 3.0, 1e-11);
    EXPECT_NEAR(c.probs(0, 1), 1.0 / 3.0, 1e-11);
}

TEST(TabularClassifier, HeavySmoothingIsUniform) {
    ClassifierSpec spec;
    spec.smoothing_alpha = 1e12;
    const FittedClassifier c = fit_classifier(spec, toy(2, 3, {{0, 0}, {0, 0}, {1, 2}}));
    EXPECT_LT((c.probs.probs().array() - 1.0 / 3.0).abs().maxCoeff(), 1e-9);
}

TEST(TabularClassifier, UnvisitedStateIsUniformAndRecorded) {
    const FittedClassifier c = fit_classifier(ClassifierSpec{}, toy(3, 2, {{0, 0}, {2, 1}}));
    ASSERT_EQ(c.diagnostics.unvisited_states, std::vector<Index>{1});
    EXPECT_DOUBLE_EQ(c.probs(1, 0), 0.5);
}

TEST(TabularClassifier, FloorHolds) {
    ClassifierSpec spec;
    spec.prob_floor = 1e-3;
    const FittedClassifier c = fit_classifier(spec, toy(1, 4, {{0, 0}, {0, 0}}));
    EXPECT_GE(c.probs.probs().minCoeff(), spec.prob_floor / 2);
    EXPECT_NEAR(c.probs.probs().row(0).sum(), 1.0, 1e-12);
    EXPECT_THROW(fit_classifier(ClassifierSpec{}, toy(1, 2, {})), InvalidArgument);
}

TEST(LogPolicy, Examples) {
    const FittedClassifier uniform = fit_classifier(ClassifierSpec{}, toy(3, 5, {{0, 0}, {0, 1}, {0, 2}, {0, 3}, {0, 4}}));
    const StateActionFn u = log_policy(uniform);
    EXPECT_LT((u.values().array() + std::log(5.0)).abs().maxCoeff(), 1e-12);

    Gen g(1);
    const FittedClassifier c = fit_classifier(ClassifierSpec{}, draw(g.policy(6, 4), 300, 2));
    const StateActionFn lp = log_policy(c);
    EXPECT_LT((lp.values().array().exp().rowwise().sum() - 1.0).abs().maxCoeff(), 1e-12);
    EXPECT_LT(sup_norm(logsumexp_actions(lp)), 1e-12);
    EXPECT_GE(lp.values().minCoeff(), std::log(c.prob_floor / 2));
}

TEST(LogisticClassifier, OneHotWithinTwiceTabularKl) {
    Gen g(3);
    const PolicyTable pi = g.policy(10, 4);
    const TransitionDataset data = draw(pi, 50000, 4);
    const FittedClassifier tab = fit_classifier(ClassifierSpec{}, data);
    ClassifierSpec spec;
    spec.kind = ClassifierKind::MultinomialLogistic;
    spec.features = std::make_shared<FeatureMap>(FeatureMap::one_hot(10, 4));
    const FittedClassifier log = fit_classifier(spec, data);
    EXPECT_LE(mean_kl(pi, log.probs), 2.0 * mean_kl(pi, tab.probs));
    EXPECT_GE(log.probs.probs().minCoeff(), spec.prob_floor / 2);
}

TEST(LogisticClassifier, GradientDescentApproachesNewton) {
    Gen g(5);
    const PolicyTable pi = g.policy(4, 3, 0.5);
    const TransitionDataset data = draw(pi, 4000, 6);
    ClassifierSpec spec;
    spec.kind = ClassifierKind::MultinomialLogistic;
    spec.features = std::make_shared<FeatureMap>(FeatureMap::one_hot(4, 3));
    const FittedClassifier newton = fit_classifier(spec, data);
    spec.optimizer = LogisticOptimizer::GradientDescent;
    spec.epochs = 20000;
    const FittedClassifier gd = fit_classifier(spec, data);
    EXPECT_LT((newton.probs.probs() - gd.probs.probs()).cwiseAbs().maxCoeff(), 1e-3);
    const auto& trace = gd.diagnostics.loss_trace;
    ASSERT_GE(trace.size(), 2u);
    EXPECT_LE(trace.back(), trace.front());
}

TEST(LogisticClassifier, LowDimensionalFeatures) {
    // Logits linear in a 2-d feature: the model is well specified.
    const Index S = 5, A = 3;
    Matrix phi(S * A, 2);
    Gen g(7);
    for (Index i = 0; i < S * A; ++i) phi.row(i) << g.normal(), g.normal();
    const FeatureMap fm(S, A, phi);
    const Vector theta{{0.8, -0.5}};
    const PolicyTable pi = PolicyTable::softmax(fm.linear(theta));
    ClassifierSpec spec;
    spec.kind = ClassifierKind::MultinomialLogistic;
    spec.features = std::make_shared<FeatureMap>(fm);
    spec.l2 = 0.0;
    const FittedClassifier c = fit_classifier(spec, draw(pi, 50000, 8));
    EXPECT_LT(mean_kl(pi, c.probs), 1e-3);
}

TEST(TabularClassifier, KlShrinksWithSampleSize) {
    Gen g(9);
    const PolicyTable pi = g.policy(8, 3);
    ClassifierSpec spec;
    spec.smoothing_alpha = 0.5;
    int wins_small = 0, wins_large = 0;
    const int seeds = 24;
    for (int seed = 0; seed < seeds; ++seed) {
        const double k1 = mean_kl(pi, fit_classifier(spec, draw(pi, 1000, 100 + seed)).probs);
        const double k2 = mean_kl(pi, fit_classifier(spec, draw(pi, 10000, 200 + seed)).probs);
        const double k3 = mean_kl(pi, fit_classifier(spec, draw(pi, 100000, 300 + seed)).probs);
        wins_small += k2 < k1;
        wins_large += k3 < k2;
    }
    // One-sided sign test at about the 1% level for 24 trials.
    EXPECT_GE(wins_small, 18);
    EXPECT_GE(wins_large, 18);
}

TEST(Regressor, ConstantTargets) {
    std::vector<RegressionSample> samples{{0, 0, 7.0}, {1, 1, 7.0}, {2, 0, 7.0}, {2, 1, 7.0}};
    const FittedRegressor tab = fit_regressor(RegressorSpec{}, samples, 3, 2);
    for (const auto& x : samples) EXPECT_DOUBLE_EQ(predict(tab, x.s, x.a), 7.0);

    RegressorSpec ridge;
    ridge.kind = RegressorKind::Ridge;
    Matrix phi = Matrix::Ones(6, 1);
    ridge.features = std::make_shared<FeatureMap>(3, 2, phi);
    const FittedRegressor r = fit_regressor(ridge, samples, 3, 2);
    for (const auto& x : samples) EXPECT_NEAR(predict(r, x.s, x.a), 7.0, 1e-12);
}

TEST(Regressor, TabularMeanAndFallback) {
    RegressorSpec spec;
    spec.fallback = -3.5;
    std::vector<RegressionSample> samples{{0, 1, 1.0}, {0, 1, 3.0}};
    const FittedRegressor m = fit_regressor(spec, samples, 2, 2);
    EXPECT_DOUBLE_EQ(predict(m, 0, 1), 2.0);
    EXPECT_DOUBLE_EQ(predict(m, 1, 0), -3.5);
    EXPECT_EQ(m.diagnostics.unvisited_cells, 3u);
    const StateActionFn t = predict_table(m);
    EXPECT_DOUBLE_EQ(t(0, 1), 2.0);
    EXPECT_THROW(predict(m, 2, 0), InvalidArgument);
}

TEST(Regressor, WeightsActAsMultiplicity) {
    std::vector<RegressionSample> weighted{{0, 0, 1.0, 3.0}, {0, 0, 5.0, 1.0}};
    EXPECT_DOUBLE_EQ(predict(fit_regressor(RegressorSpec{}, weighted, 1, 1), 0, 0), 2.0);
}

TEST(Regressor, OneHotRidgeEqualsTabularMean) {
    Gen g(10);
    std::vector<RegressionSample> samples;
    for (int i = 0; i < 200; ++i) samples.push_back({g.integer(0, 4), g.integer(0, 2), g.normal(3.0)});
    samples.push_back({5, 0, 1.0});
    const FittedRegressor tab = fit_regressor(RegressorSpec{}, samples, 6, 3);

    // One-hot on visited cells only, so lambda = 0 is well posed.
    Matrix visited = Matrix::Zero(6, 3);
    for (const auto& x : samples) visited(x.s, x.a) = 1.0;
    Matrix phi = Matrix::Zero(18, 18);
    for (Index s = 0; s < 6; ++s) {
        for (Index a = 0; a < 3; ++a) {
            if (visited(s, a) > 0) phi(s * 3 + a, s * 3 + a) = 1.0;
        }
    }
    std::vector<Index> keep;
    for (Index j = 0; j < 18; ++j) {
        if (phi.col(j).sum() > 0) keep.push_back(j);
    }
    Matrix reduced(18, static_cast<Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) reduced.col(static_cast<Index>(k)) = phi.col(keep[k]);

    RegressorSpec spec;
    spec.kind = RegressorKind::Ridge;
    spec.features = std::make_shared<FeatureMap>(6, 3, reduced);
    const FittedRegressor ridge = fit_regressor(spec, samples, 6, 3);
    for (Index s = 0; s < 6; ++s) {
        for (Index a = 0; a < 3; ++a) {
            if (visited(s, a) > 0) EXPECT_NEAR(predict(ridge, s, a), predict(tab, s, a), 1e-10);
        }
    }
}

TEST(Regressor, RankDeficientAdvisesLambda) {
    RegressorSpec spec;
    spec.kind = RegressorKind::Ridge;
    spec.features = std::make_shared<FeatureMap>(FeatureMap::one_hot(2, 2));
    std::vector<RegressionSample> samples{{0, 0, 1.0}};
    try {
        fit_regressor(spec, samples, 2, 2);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("ridge_lambda"), std::string::npos);
    }
    spec.ridge_lambda = 1e-3;
    EXPECT_NO_THROW(fit_regressor(spec, samples, 2, 2));
}

TEST(Regressor, RidgeIsLinearInFeatures) {
    Gen g(11);
    Matrix phi(12, 3);
    for (Index i = 0; i < 12; ++i) phi.row(i) << g.normal(), g.normal(), g.normal();
    RegressorSpec spec;
    spec.kind = RegressorKind::Ridge;
    spec.ridge_lambda = 0.1;
    spec.features = std::make_shared<FeatureMap>(4, 3, phi);
    std::vector<RegressionSample> samples;
    for (int i = 0; i < 50; ++i) samples.push_back({g.integer(0, 3), g.integer(0, 2), g.normal()});
    const FittedRegressor r = fit_regressor(spec, samples, 4, 3);
    for (Index s = 0; s < 4; ++s) {
        for (Index a = 0; a < 3; ++a) EXPECT_NEAR(predict(r, s, a), phi.row(s * 3 + a).dot(r.weights), 1e-12);
    }
}

TEST(Regressor, BeatsEveryConstant) {
    Gen g(12);
    for (RegressorKind kind : {RegressorKind::TabularMean, RegressorKind::Ridge}) {
        std::vector<RegressionSample> samples;
        for (int i = 0; i < 300; ++i) samples.push_back({g.integer(0, 5), g.integer(0, 1), g.normal(2.0)});
        RegressorSpec spec;
        spec.kind = kind;
        spec.ridge_lambda = 1e-6;
        Matrix basis(12, 2);
        for (Index i = 0; i < 12; ++i) basis.row(i) << 1.0, g.normal();
        spec.features = std::make_shared<FeatureMap>(6, 2, basis);
        const FittedRegressor m = fit_regressor(spec, samples, 6, 2);
        auto risk = [&](auto f) {
            double total = 0.0;
            for (const auto& x : samples) total += std::pow(x.y - f(x), 2);
            return total;
        };
        const double fitted = risk([&](const RegressionSample& x) { return predict(m, x.s, x.a); });
        for (int trial = 0; trial < 20; ++trial) {
            const double c = g.normal(2.0);
            EXPECT_LE(fitted, risk([&](const RegressionSample&) { return c; }) + 1e-9);
        }
    }
}

TEST(OracleNames, RoundTrip) {
    for (auto k : {ClassifierKind::TabularCount, ClassifierKind::MultinomialLogistic}) {
        EXPECT_EQ(parse_classifier_kind(to_string(k)), k);
    }
    for (auto k : {RegressorKind::TabularMean, RegressorKind::Ridge}) EXPECT_EQ(parse_regressor_kind(to_string(k)), k);
    EXPECT_THROW(parse_classifier_kind("mlp"), InvalidArgument);
}
