#pragma once

// Finite MDPs and the exact operators used throughout the library:
// the transition expectation P, the mu-expectation over actions, the
// log-sum-exp over actions, soft Bellman backups, policy evaluation and
// stationary distributions.
//
// All tables are dense and row-major by state. A state-action table has
// shape (n_states, n_actions); the transition kernel has one row per
// (s, a) pair at index s * n_actions + a and one column per next state.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>

namespace ctrirl {

using Index = Eigen::Index;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Tolerance used when validating that rows of probability tables sum to one.
inline constexpr double kProbabilityTolerance = 1e-12;

/// Real-valued function of the state.
class StateFn {
public:
    StateFn() = default;
    explicit StateFn(Index n_states, double fill = 0.0);
    explicit StateFn(Vector values);

    Index size() const noexcept { return values_.size(); }
    double operator[](Index s) const { return values_[s]; }
    double& operator[](Index s) { return values_[s]; }

    const Vector& values() const noexcept { return values_; }
    Vector& values() noexcept { return values_; }

private:
    Vector values_;
};

/// Real-valued function of a state-action pair: rewards, soft values, Q, log-policies.
class StateActionFn {
public:
    StateActionFn() = default;
    StateActionFn(Index n_states, Index n_actions, double fill = 0.0);
    explicit StateActionFn(Matrix values);

    Index n_states() const noexcept { return values_.rows(); }
    Index n_actions() const noexcept { return values_.cols(); }
    double operator()(Index s, Index a) const { return values_(s, a); }
    double& operator()(Index s, Index a) { return values_(s, a); }

    const Matrix& values() const noexcept { return values_; }
    Matrix& values() noexcept { return values_; }

    bool all_finite() const { return values_.allFinite(); }

private:
    Matrix values_;
};

StateActionFn operator+(const StateActionFn& x, const StateActionFn& y);
StateActionFn operator-(const StateActionFn& x, const StateActionFn& y);
StateActionFn operator*(double k, const StateActionFn& x);
StateFn operator+(const StateFn& x, const StateFn& y);
StateFn operator-(const StateFn& x, const StateFn& y);
StateFn operator*(double k, const StateFn& x);

/// f(s, a) + g(s): broadcasts a state function across actions.
StateActionFn add_state(const StateActionFn& f, const StateFn& g);

/// Conditional distribution over actions given the state. Used for behavior
/// policies, their estimates, and reference measures.
class PolicyTable {
public:
    PolicyTable() = default;
    /// Throws InvalidArgument unless every row is a distribution.
    explicit PolicyTable(Matrix probs);

    static PolicyTable uniform(Index n_states, Index n_actions);
    static PolicyTable point_mass(Index n_states, Index n_actions, Index action);
    /// Row-wise softmax of the logits.
    static PolicyTable softmax(const StateActionFn& logits);

    Index n_states() const noexcept { return probs_.rows(); }
    Index n_actions() const noexcept { return probs_.cols(); }
    double operator()(Index s, Index a) const { return probs_(s, a); }
    const Matrix& probs() const noexcept { return probs_; }

    /// Entrywise log. Zero entries map to -inf.
    StateActionFn log() const;

private:
    Matrix probs_;
};

/// Probability vector over states.
class StateDistribution {
public:
    StateDistribution() = default;
    explicit StateDistribution(Vector weights);

    static StateDistribution uniform(Index n_states);
    static StateDistribution point_mass(Index n_states, Index state);

    Index size() const noexcept { return weights_.size(); }
    double operator[](Index s) const { return weights_[s]; }
    const Vector& weights() const noexcept { return weights_; }

private:
    Vector weights_;
};

/// Probability table over state-action pairs, e.g. the empirical (s, a)
/// frequencies of a dataset or lambda (x) mu.
class OccupancyMeasure {
public:
    OccupancyMeasure() = default;
    explicit OccupancyMeasure(Matrix weights);

    /// lambda(s) * mu(a|s).
    static OccupancyMeasure product(const StateDistribution& lambda, const PolicyTable& mu);

    Index n_states() const noexcept { return weights_.rows(); }
    Index n_actions() const noexcept { return weights_.cols(); }
    double operator()(Index s, Index a) const { return weights_(s, a); }
    const Matrix& weights() const noexcept { return weights_; }
    StateDistribution state_marginal() const;

private:
    Matrix weights_;
};

class TabularMdp {
public:
    /// `transition` has n_states * n_actions rows and n_states columns.
    TabularMdp(Index n_states, Index n_actions, Matrix transition, double gamma);

    Index n_states() const noexcept { return n_states_; }
    Index n_actions() const noexcept { return n_actions_; }
    double gamma() const noexcept { return gamma_; }
    const Matrix& transition() const noexcept { return transition_; }
    double prob(Index s, Index a, Index next) const { return transition_(s * n_actions_ + a, next); }

    /// Same kernel, different discount.
    TabularMdp with_gamma(double gamma) const;

private:
    Index n_states_;
    Index n_actions_;
    Matrix transition_;
    double gamma_;
};

/// (P f)(s, a) = sum_{s'} P(s'|s, a) f(s').
StateActionFn apply_p(const TabularMdp& mdp, const StateFn& f);

/// (mu f)(s) = sum_a mu(a|s) f(s, a).
StateFn expect_mu(const PolicyTable& mu, const StateActionFn& f);

/// log sum_a exp f(s, a), evaluated with max subtraction.
StateFn logsumexp_actions(const StateActionFn& f);

/// P Xi(r + gamma v): one soft Bellman backup of v.
StateActionFn soft_bellman_backup(const TabularMdp& mdp, const StateActionFn& r, const StateActionFn& v);

/// v - P Xi(r + gamma v). Zero exactly when (r, v) satisfies the soft Bellman equation.
StateActionFn soft_bellman_residual(const TabularMdp& mdp, const StateActionFn& r, const StateActionFn& v);

struct SoftValueResult {
    StateActionFn v;
    StateActionFn q;
    PolicyTable pi_star;
    std::size_t iterations = 0;
    double residual = 0.0;
};

/// Iterates soft Bellman backups from `v0` (zeros when absent) until the
/// sup-norm residual is at most `tol`. Throws ConvergenceError otherwise.
SoftValueResult soft_value_iteration(const TabularMdp& mdp, const StateActionFn& r, double tol,
                                     std::size_t max_iter,
                                     const std::optional<StateActionFn>& v0 = std::nullopt);

/// Q of policy `pi` under reward `r`: the solution of Q = r + gamma P(pi Q),
/// computed by a dense linear solve.
StateActionFn policy_q(const TabularMdp& mdp, const StateActionFn& r, const PolicyTable& pi);

/// V = pi Q.
StateFn policy_value(const TabularMdp& mdp, const StateActionFn& r, const PolicyTable& pi);

/// State-to-state kernel of the chain s -> a ~ mu(.|s) -> s' ~ P(.|s, a).
Matrix state_kernel(const TabularMdp& mdp, const PolicyTable& mu);

/// lambda with lambda = lambda P mu, by power iteration from the uniform
/// distribution. Periodic or reducible chains do not converge and throw.
StateDistribution stationary_distribution(const TabularMdp& mdp, const PolicyTable& mu,
                                          double tol = 1e-12, std::size_t max_iter = 100000);

/// E_{(s,a)~weights}[ r + gamma v - Xi(r + gamma v)(s) ].
double conditional_loglik(const OccupancyMeasure& weights, const StateActionFn& r, const StateActionFn& v,
                          double gamma);

double sup_norm(const StateActionFn& f);
double sup_norm(const StateFn& f);
/// (E_{(s,a)~weights} f(s,a)^2)^{1/2}.
double l2_norm(const StateActionFn& f, const OccupancyMeasure& weights);

/// Throws ShapeError unless `f` has the MDP's state-action shape.
void require_shape(const TabularMdp& mdp, const StateActionFn& f, const char* what);

} // namespace ctrirl
