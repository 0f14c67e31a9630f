#include "ctrirl/mdp.hpp"

#include "ctrirl/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ctrirl {

namespace {

void require_same_shape(const StateActionFn& x, const StateActionFn& y, const char* what) {
    if (x.n_states() != y.n_states() || x.n_actions() != y.n_actions()) {
        throw ShapeError(std::string(what) + ": shape (" + std::to_string(x.n_states()) + ", " +
                         std::to_string(x.n_actions()) + ") vs (" + std::to_string(y.n_states()) + ", " +
                         std::to_string(y.n_actions()) + ")");
    }
}

void require_distribution_rows(const Matrix& m, const char* what) {
    for (Index s = 0; s < m.rows(); ++s) {
        double total = 0.0;
        for (Index a = 0; a < m.cols(); ++a) {
            const double p = m(s, a);
            if (!(p >= 0.0) || !std::isfinite(p)) {
                throw InvalidArgument(std::string(what) + ": negative or non-finite entry in row " +
                                      std::to_string(s));
            }
            total += p;
        }
        if (std::abs(total - 1.0) > kProbabilityTolerance) {
            throw InvalidArgument(std::string(what) + ": row " + std::to_string(s) + " sums to " +
                                  std::to_string(total));
        }
    }
}

} // namespace

StateFn::StateFn(Index n_states, double fill) : values_(Vector::Constant(n_states, fill)) {}
StateFn::StateFn(Vector values) : values_(std::move(values)) {}

StateActionFn::StateActionFn(Index n_states, Index n_actions, double fill)
    : values_(Matrix::Constant(n_states, n_actions, fill)) {}
StateActionFn::StateActionFn(Matrix values) : values_(std::move(values)) {}

StateActionFn operator+(const StateActionFn& x, const StateActionFn& y) {
    require_same_shape(x, y, "operator+");
    return StateActionFn(Matrix(x.values() + y.values()));
}

StateActionFn operator-(const StateActionFn& x, const StateActionFn& y) {
    require_same_shape(x, y, "operator-");
    return StateActionFn(Matrix(x.values() - y.values()));
}

StateActionFn operator*(double k, const StateActionFn& x) { return StateActionFn(Matrix(k * x.values())); }

StateFn operator+(const StateFn& x, const StateFn& y) {
    if (x.size() != y.size()) throw ShapeError("operator+: state function sizes differ");
    return StateFn(Vector(x.values() + y.values()));
}

StateFn operator-(const StateFn& x, const StateFn& y) {
    if (x.size() != y.size()) throw ShapeError("operator-: state function sizes differ");
    return StateFn(Vector(x.values() - y.values()));
}

StateFn operator*(double k, const StateFn& x) { return StateFn(Vector(k * x.values())); }

StateActionFn add_state(const StateActionFn& f, const StateFn& g) {
    if (f.n_states() != g.size()) throw ShapeError("add_state: state counts differ");
    Matrix out = f.values();
    out.colwise() += g.values();
    return StateActionFn(std::move(out));
}

// ---------------------------------------------------------------------------

PolicyTable::PolicyTable(Matrix probs) : probs_(std::move(probs)) {
    require_distribution_rows(probs_, "PolicyTable");
}

PolicyTable PolicyTable::uniform(Index n_states, Index n_actions) {
    if (n_states <= 0 || n_actions <= 0) throw InvalidArgument("PolicyTable::uniform: empty shape");
    return PolicyTable(Matrix::Constant(n_states, n_actions, 1.0 / static_cast<double>(n_actions)));
}

PolicyTable PolicyTable::point_mass(Index n_states, Index n_actions, Index action) {
    if (action < 0 || action >= n_actions) throw InvalidArgument("PolicyTable::point_mass: action out of range");
    Matrix m = Matrix::Zero(n_states, n_actions);
    m.col(action).setOnes();
    return PolicyTable(std::move(m));
}

PolicyTable PolicyTable::softmax(const StateActionFn& logits) {
    Matrix m(logits.n_states(), logits.n_actions());
    for (Index s = 0; s < m.rows(); ++s) {
        const double mx = logits.values().row(s).maxCoeff();
        double total = 0.0;
        for (Index a = 0; a < m.cols(); ++a) {
            m(s, a) = std::exp(logits(s, a) - mx);
            total += m(s, a);
        }
        m.row(s) /= total;
    }
    return PolicyTable(std::move(m));
}

StateActionFn PolicyTable::log() const { return StateActionFn(Matrix(probs_.array().log().matrix())); }

// ---------------------------------------------------------------------------

StateDistribution::StateDistribution(Vector weights) : weights_(std::move(weights)) {
    Matrix row = weights_.transpose();
    require_distribution_rows(row, "StateDistribution");
}

StateDistribution StateDistribution::uniform(Index n_states) {
    if (n_states <= 0) throw InvalidArgument("StateDistribution::uniform: empty");
    return StateDistribution(Vector::Constant(n_states, 1.0 / static_cast<double>(n_states)));
}

StateDistribution StateDistribution::point_mass(Index n_states, Index state) {
    if (state < 0 || state >= n_states) throw InvalidArgument("StateDistribution::point_mass: state out of range");
    Vector w = Vector::Zero(n_states);
    w[state] = 1.0;
    return StateDistribution(std::move(w));
}

OccupancyMeasure::OccupancyMeasure(Matrix weights) : weights_(std::move(weights)) {
    if ((weights_.array() < 0.0).any() || !weights_.allFinite()) {
        throw InvalidArgument("OccupancyMeasure: negative or non-finite weight");
    }
    if (std::abs(weights_.sum() - 1.0) > 1e-9) {
        throw InvalidArgument("OccupancyMeasure: weights sum to " + std::to_string(weights_.sum()));
    }
}

OccupancyMeasure OccupancyMeasure::product(const StateDistribution& lambda, const PolicyTable& mu) {
    if (lambda.size() != mu.n_states()) throw ShapeError("OccupancyMeasure::product: state counts differ");
    Matrix w = mu.probs();
    for (Index s = 0; s < w.rows(); ++s) w.row(s) *= lambda[s];
    return OccupancyMeasure(std::move(w));
}

StateDistribution OccupancyMeasure::state_marginal() const {
    Vector m = weights_.rowwise().sum();
    m /= m.sum();
    return StateDistribution(std::move(m));
}

// ---------------------------------------------------------------------------

TabularMdp::TabularMdp(Index n_states, Index n_actions, Matrix transition, double gamma)
    : n_states_(n_states), n_actions_(n_actions), transition_(std::move(transition)), gamma_(gamma) {
    if (n_states <= 0 || n_actions <= 0) throw InvalidArgument("TabularMdp: state and action counts must be positive");
    if (transition_.rows() != n_states * n_actions || transition_.cols() != n_states) {
        throw ShapeError("TabularMdp: transition must be (n_states*n_actions) x n_states");
    }
    if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidArgument("TabularMdp: gamma must lie in [0, 1)");
    require_distribution_rows(transition_, "TabularMdp transition");
}

TabularMdp TabularMdp::with_gamma(double gamma) const { return TabularMdp(n_states_, n_actions_, transition_, gamma); }

void require_shape(const TabularMdp& mdp, const StateActionFn& f, const char* what) {
    if (f.n_states() != mdp.n_states() || f.n_actions() != mdp.n_actions()) {
        throw ShapeError(std::string(what) + ": expected shape (" + std::to_string(mdp.n_states()) + ", " +
                         std::to_string(mdp.n_actions()) + "), got (" + std::to_string(f.n_states()) + ", " +
                         std::to_string(f.n_actions()) + ")");
    }
}

StateActionFn apply_p(const TabularMdp& mdp, const StateFn& f) {
    if (f.size() != mdp.n_states()) {
        throw ShapeError("apply_p: state function has " + std::to_string(f.size()) + " entries, MDP has " +
                         std::to_string(mdp.n_states()) + " states");
    }
    Vector flat = mdp.transition() * f.values();
    return StateActionFn(Matrix(Eigen::Map<const Matrix>(flat.data(), mdp.n_states(), mdp.n_actions())));
}

StateFn expect_mu(const PolicyTable& mu, const StateActionFn& f) {
    if (mu.n_states() != f.n_states() || mu.n_actions() != f.n_actions()) {
        throw ShapeError("expect_mu: measure and function shapes differ");
    }
    return StateFn(Vector(mu.probs().cwiseProduct(f.values()).rowwise().sum()));
}

StateFn logsumexp_actions(const StateActionFn& f) {
    Vector out(f.n_states());
    for (Index s = 0; s < f.n_states(); ++s) {
        const double mx = f.values().row(s).maxCoeff();
        out[s] = mx + std::log((f.values().row(s).array() - mx).exp().sum());
    }
    return StateFn(std::move(out));
}

StateActionFn soft_bellman_backup(const TabularMdp& mdp, const StateActionFn& r, const StateActionFn& v) {
    require_shape(mdp, r, "soft_bellman_backup(r)");
    require_shape(mdp, v, "soft_bellman_backup(v)");
    return apply_p(mdp, logsumexp_actions(r + mdp.gamma() * v));
}

StateActionFn soft_bellman_residual(const TabularMdp& mdp, const StateActionFn& r, const StateActionFn& v) {
    return v - soft_bellman_backup(mdp, r, v);
}

SoftValueResult soft_value_iteration(const TabularMdp& mdp, const StateActionFn& r, double tol,
                                     std::size_t max_iter, const std::optional<StateActionFn>& v0) {
    if (!(tol > 0.0)) throw InvalidArgument("soft_value_iteration: tol must be positive");
    require_shape(mdp, r, "soft_value_iteration(r)");
    StateActionFn v = v0 ? *v0 : StateActionFn(mdp.n_states(), mdp.n_actions());
    require_shape(mdp, v, "soft_value_iteration(v0)");

    double residual = std::numeric_limits<double>::infinity();
    for (std::size_t it = 1; it <= max_iter; ++it) {
        StateActionFn next = soft_bellman_backup(mdp, r, v);
        residual = (next.values() - v.values()).cwiseAbs().maxCoeff();
        v = std::move(next);
        if (!std::isfinite(residual)) break;
        if (residual <= tol) {
            StateActionFn q = r + mdp.gamma() * v;
            PolicyTable pi = PolicyTable::softmax(q);
            return SoftValueResult{std::move(v), std::move(q), std::move(pi), it, residual};
        }
    }
    throw ConvergenceError("soft_value_iteration: residual " + std::to_string(residual) + " above tolerance after " +
                               std::to_string(max_iter) + " iterations",
                           residual);
}

namespace {

// Rows/cols indexed by s * n_actions + a: (P pi)(sa, s'a') = P(s'|s,a) pi(a'|s').
Matrix state_action_kernel(const TabularMdp& mdp, const PolicyTable& pi) {
    const Index S = mdp.n_states();
    const Index A = mdp.n_actions();
    Matrix k(S * A, S * A);
    for (Index row = 0; row < S * A; ++row) {
        for (Index next = 0; next < S; ++next) {
            const double p = mdp.transition()(row, next);
            for (Index a = 0; a < A; ++a) k(row, next * A + a) = p * pi(next, a);
        }
    }
    return k;
}

} // namespace

StateActionFn policy_q(const TabularMdp& mdp, const StateActionFn& r, const PolicyTable& pi) {
    require_shape(mdp, r, "policy_q(r)");
    if (pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions()) {
        throw ShapeError("policy_q: policy shape differs from MDP");
    }
    const Index n = mdp.n_states() * mdp.n_actions();
    Matrix system = Matrix::Identity(n, n) - mdp.gamma() * state_action_kernel(mdp, pi);
    Vector rhs = Eigen::Map<const Vector>(r.values().data(), n);
    Vector q = system.partialPivLu().solve(rhs);

    StateActionFn out(Matrix(Eigen::Map<const Matrix>(q.data(), mdp.n_states(), mdp.n_actions())));
    const double residual = sup_norm(out - r - mdp.gamma() * apply_p(mdp, expect_mu(pi, out)));
    if (!(residual <= 1e-9)) {
        throw Error("policy_q: linear solve residual " + std::to_string(residual) + " exceeds 1e-9");
    }
    return out;
}

StateFn policy_value(const TabularMdp& mdp, const StateActionFn& r, const PolicyTable& pi) {
    return expect_mu(pi, policy_q(mdp, r, pi));
}

Matrix state_kernel(const TabularMdp& mdp, const PolicyTable& mu) {
    if (mu.n_states() != mdp.n_states() || mu.n_actions() != mdp.n_actions()) {
        throw ShapeError("state_kernel: measure shape differs from MDP");
    }
    const Index S = mdp.n_states();
    const Index A = mdp.n_actions();
    Matrix k = Matrix::Zero(S, S);
    for (Index s = 0; s < S; ++s) {
        for (Index a = 0; a < A; ++a) k.row(s) += mu(s, a) * mdp.transition().row(s * A + a);
    }
    return k;
}

StateDistribution stationary_distribution(const TabularMdp& mdp, const PolicyTable& mu, double tol,
                                          std::size_t max_iter) {
    const Matrix kernel = state_kernel(mdp, mu);
    Eigen::RowVectorXd lambda = Eigen::RowVectorXd::Constant(mdp.n_states(), 1.0 / static_cast<double>(mdp.n_states()));
    double residual = std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it < max_iter; ++it) {
        Eigen::RowVectorXd next = lambda * kernel;
        next /= next.sum();
        residual = (next - lambda).cwiseAbs().maxCoeff();
        lambda = std::move(next);
        if (residual <= tol) return StateDistribution(Vector(lambda.transpose()));
    }
    throw ConvergenceError("stationary_distribution: power iteration did not converge (residual " +
                               std::to_string(residual) +
                               "); the chain may be periodic or reducible, mix it with a lazy or restart kernel",
                           residual);
}

double conditional_loglik(const OccupancyMeasure& weights, const StateActionFn& r, const StateActionFn& v,
                          double gamma) {
    if (weights.n_states() != r.n_states() || weights.n_actions() != r.n_actions()) {
        throw ShapeError("conditional_loglik: weights and reward shapes differ");
    }
    const StateActionFn q = r + gamma * v;
    const StateFn lse = logsumexp_actions(q);
    double total = 0.0;
    for (Index s = 0; s < q.n_states(); ++s) {
        for (Index a = 0; a < q.n_actions(); ++a) {
            if (weights(s, a) > 0.0) total += weights(s, a) * (q(s, a) - lse[s]);
        }
    }
    return total;
}

double sup_norm(const StateActionFn& f) { return f.values().size() == 0 ? 0.0 : f.values().cwiseAbs().maxCoeff(); }
double sup_norm(const StateFn& f) { return f.size() == 0 ? 0.0 : f.values().cwiseAbs().maxCoeff(); }

double l2_norm(const StateActionFn& f, const OccupancyMeasure& weights) {
    if (weights.n_states() != f.n_states() || weights.n_actions() != f.n_actions()) {
        throw ShapeError("l2_norm: weights and function shapes differ");
    }
    return std::sqrt(weights.weights().cwiseProduct(f.values().cwiseAbs2()).sum());
}

} // namespace ctrirl
