#pragma once

// Seeded generators and independent reference computations for tests.

#include "ctrirl/mdp.hpp"

#include <cmath>
#include <random>

namespace ctrirl::testing {

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(rng_); }
    Index integer(Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng_); }
    std::mt19937_64& engine() { return rng_; }

    /// Dense random kernel: every transition has positive probability.
    TabularMdp mdp(Index S, Index A, double gamma) {
        Matrix t(S * A, S);
        for (Index i = 0; i < S * A; ++i) {
            for (Index j = 0; j < S; ++j) t(i, j) = uniform(0.05, 1.0);
            t.row(i) /= t.row(i).sum();
        }
        return TabularMdp(S, A, t, gamma);
    }

    /// Strictly positive random policy.
    PolicyTable policy(Index S, Index A, double spread = 1.0) {
        StateActionFn logits(S, A);
        for (Index s = 0; s < S; ++s) {
            for (Index a = 0; a < A; ++a) logits(s, a) = normal(spread);
        }
        return PolicyTable::softmax(logits);
    }

    StateActionFn table(Index S, Index A, double sd = 1.0) {
        StateActionFn f(S, A);
        for (Index s = 0; s < S; ++s) {
            for (Index a = 0; a < A; ++a) f(s, a) = normal(sd);
        }
        return f;
    }

    StateFn state_fn(Index S, double sd = 1.0) {
        StateFn f(S);
        for (Index s = 0; s < S; ++s) f[s] = normal(sd);
        return f;
    }

private:
    std::mt19937_64 rng_;
};

/// Two states; action 0 stays, action 1 toggles.
inline TabularMdp toggle_mdp(double gamma) {
    Matrix t = Matrix::Zero(4, 2);
    t(0, 0) = 1.0;  // s0, stay
    t(1, 1) = 1.0;  // s0, toggle
    t(2, 1) = 1.0;  // s1, stay
    t(3, 0) = 1.0;  // s1, toggle
    return TabularMdp(2, 2, t, gamma);
}

/// Soft value iteration written out with plain loops, as an independent reference.
inline StateActionFn reference_soft_value(const TabularMdp& mdp, const StateActionFn& r, double tol) {
    const Index S = mdp.n_states(), A = mdp.n_actions();
    std::vector<double> V(S, 0.0);
    for (int it = 0; it < 1000000; ++it) {
        std::vector<double> next(S);
        double delta = 0.0;
        for (Index s = 0; s < S; ++s) {
            double m = -INFINITY;
            std::vector<double> q(A);
            for (Index a = 0; a < A; ++a) {
                double ev = 0.0;
                for (Index t = 0; t < S; ++t) ev += mdp.prob(s, a, t) * V[t];
                q[a] = r(s, a) + mdp.gamma() * ev;
                m = std::max(m, q[a]);
            }
            double z = 0.0;
            for (Index a = 0; a < A; ++a) z += std::exp(q[a] - m);
            next[s] = m + std::log(z);
            delta = std::max(delta, std::abs(next[s] - V[s]));
        }
        V = next;
        if (delta < tol) break;
    }
    StateActionFn v(S, A);
    for (Index s = 0; s < S; ++s) {
        for (Index a = 0; a < A; ++a) {
            double ev = 0.0;
            for (Index t = 0; t < S; ++t) ev += mdp.prob(s, a, t) * V[t];
            v(s, a) = ev;
        }
    }
    return v;
}

inline double max_abs_diff(const StateActionFn& x, const StateActionFn& y) {
    return (x.values() - y.values()).cwiseAbs().maxCoeff();
}

inline double max_abs_diff(const StateFn& x, const StateFn& y) {
    return (x.values() - y.values()).cwiseAbs().maxCoeff();
}

} // namespace ctrirl::testing
