#include "ctrirl/maxent.hpp"

#include "ctrirl/error.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace ctrirl {

std::string to_string(MaxEntOptimizer o) { return o == MaxEntOptimizer::Adam ? "adam" : "gradient-ascent"; }
std::string to_string(StepSchedule s) { return s == StepSchedule::Constant ? "constant" : "inverse-sqrt"; }
std::string to_string(WeightInit w) { return w == WeightInit::Zeros ? "zeros" : "gaussian"; }

MaxEntOptimizer parse_maxent_optimizer(std::string_view text) {
    if (text == "gradient-ascent") return MaxEntOptimizer::GradientAscent;
    if (text == "adam") return MaxEntOptimizer::Adam;
    throw InvalidArgument("unknown optimizer '" + std::string(text) + "' (gradient-ascent|adam)");
}

StepSchedule parse_step_schedule(std::string_view text) {
    if (text == "constant") return StepSchedule::Constant;
    if (text == "inverse-sqrt") return StepSchedule::InverseSqrt;
    throw InvalidArgument("unknown schedule '" + std::string(text) + "' (constant|inverse-sqrt)");
}

WeightInit parse_weight_init(std::string_view text) {
    if (text == "zeros") return WeightInit::Zeros;
    if (text == "gaussian") return WeightInit::Gaussian;
    throw InvalidArgument("unknown init '" + std::string(text) + "' (zeros|gaussian)");
}

namespace {

void check_inputs(const TabularMdp& mdp, const FeatureMap& phi, const TransitionDataset& data) {
    if (phi.n_states() != mdp.n_states() || phi.n_actions() != mdp.n_actions()) {
        throw ShapeError("maxent: feature map shape differs from MDP");
    }
    if (data.meta().n_states != mdp.n_states() || data.meta().n_actions != mdp.n_actions()) {
        throw ShapeError("maxent: dataset shape differs from MDP");
    }
    if (data.empty()) throw InvalidArgument("maxent: empty dataset");
}

LoglikGrad loglik_and_grad(const TabularMdp& mdp, const FeatureMap& phi, const Vector& theta, const Matrix& freq,
                           double inner_tol, std::size_t inner_max_iter, const std::optional<StateActionFn>& warm) {
    if (theta.size() != phi.dim()) throw ShapeError("maxent: theta dimension differs from features");
    const Index S = mdp.n_states();
    const Index A = mdp.n_actions();
    const double gamma = mdp.gamma();

    SoftValueResult soft = soft_value_iteration(mdp, phi.linear(theta), inner_tol, inner_max_iter, warm);
    const Matrix& pi = soft.pi_star.probs();
    const StateFn lse = logsumexp_actions(soft.q);

    LoglikGrad out;
    const Vector state_mass = freq.rowwise().sum();
    for (Index s = 0; s < S; ++s) {
        for (Index a = 0; a < A; ++a) {
            if (freq(s, a) > 0.0) out.loglik += freq(s, a) * (soft.q(s, a) - lse[s]);
        }
    }

    Matrix w_tilde = freq;
    for (Index s = 0; s < S; ++s) w_tilde.row(s) -= state_mass[s] * pi.row(s);
    const Eigen::Map<const Vector> w_flat(w_tilde.data(), S * A);
    const Vector z = mdp.transition().transpose() * w_flat;
    const Matrix system = Matrix::Identity(S, S) - gamma * state_kernel(mdp, soft.pi_star);
    const Vector y = system.transpose().partialPivLu().solve(z);

    Matrix x = w_tilde;
    for (Index s = 0; s < S; ++s) x.row(s) += gamma * y[s] * pi.row(s);
    const Eigen::Map<const Vector> x_flat(x.data(), S * A);
    out.grad = phi.matrix().transpose() * x_flat;
    out.v = std::move(soft.v);
    out.pi = std::move(soft.pi_star);
    return out;
}

[[noreturn]] void nan_loss(const std::vector<double>& trace) {
    std::ostringstream msg;
    msg << "maxent_fit: loss is not finite after " << trace.size() << " evaluations; recent trace:";
    const std::size_t start = trace.size() > 10 ? trace.size() - 10 : 0;
    for (std::size_t i = start; i < trace.size(); ++i) msg << ' ' << trace[i];
    throw Error(msg.str());
}

} // namespace

LoglikGrad maxent_loglik_and_grad(const TabularMdp& mdp, const FeatureMap& phi, const Vector& theta,
                                  const TransitionDataset& data, double inner_tol, std::size_t inner_max_iter,
                                  const std::optional<StateActionFn>& warm_start) {
    check_inputs(mdp, phi, data);
    return loglik_and_grad(mdp, phi, theta, empirical_occupancy(data).weights(), inner_tol, inner_max_iter,
                           warm_start);
}

MaxEntFit maxent_fit(const TabularMdp& mdp, const FeatureMap& phi, const TransitionDataset& data,
                     const MaxEntConfig& cfg) {
    check_inputs(mdp, phi, data);
    if (!(cfg.step_size > 0.0)) throw InvalidArgument("maxent_fit: step size must be > 0");
    if (!(cfg.clip_norm > 0.0)) throw InvalidArgument("maxent_fit: clip norm must be > 0");
    if (!(cfg.inner_tol > 0.0)) throw InvalidArgument("maxent_fit: inner tolerance must be > 0");

    const Index d = phi.dim();
    Vector theta = Vector::Zero(d);
    if (cfg.init == WeightInit::Gaussian) {
        std::mt19937_64 rng(cfg.init_seed);
        std::normal_distribution<double> gauss(0.0, cfg.init_scale);
        for (Index i = 0; i < d; ++i) theta[i] = gauss(rng);
    }

    const Matrix freq = empirical_occupancy(data).weights();
    MaxEntFit fit;
    fit.theta = theta;
    std::optional<StateActionFn> warm;
    std::optional<StateActionFn> best_v;
    double best = std::numeric_limits<double>::infinity();
    std::size_t since_improvement = 0;
    Vector m1 = Vector::Zero(d);
    Vector m2 = Vector::Zero(d);

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        LoglikGrad eval = loglik_and_grad(mdp, phi, theta, freq, cfg.inner_tol, cfg.inner_max_iter, warm);
        const double loss = -eval.loglik;
        fit.loss_trace.push_back(loss);
        if (!std::isfinite(loss) || !eval.grad.allFinite()) nan_loss(fit.loss_trace);
        ++fit.epochs_run;

        if (loss < best - cfg.tolerance) {
            since_improvement = 0;
        } else {
            ++since_improvement;
        }
        if (loss < best) {
            best = loss;
            fit.theta = theta;
            fit.best_epoch = epoch;
            best_v = eval.v;
        }
        fit.best_trace.push_back(best);
        if (since_improvement >= cfg.patience) break;
        if (epoch == cfg.max_epochs) break;

        Vector g = eval.grad;
        const double norm = g.norm();
        if (norm > cfg.clip_norm) g *= cfg.clip_norm / norm;
        const double rate =
            cfg.schedule == StepSchedule::Constant ? cfg.step_size : cfg.step_size / std::sqrt(static_cast<double>(epoch));
        if (cfg.optimizer == MaxEntOptimizer::GradientAscent) {
            theta += rate * g;
        } else {
            const double t = static_cast<double>(epoch);
            m1 = cfg.adam_beta1 * m1 + (1.0 - cfg.adam_beta1) * g;
            m2 = cfg.adam_beta2 * m2 + (1.0 - cfg.adam_beta2) * g.cwiseProduct(g);
            const Vector m1_hat = m1 / (1.0 - std::pow(cfg.adam_beta1, t));
            const Vector m2_hat = m2 / (1.0 - std::pow(cfg.adam_beta2, t));
            theta += rate * m1_hat.cwiseQuotient((m2_hat.array().sqrt() + cfg.adam_epsilon).matrix());
        }
        warm = std::move(eval.v);
    }

    fit.r_hat = phi.linear(fit.theta);
    if (best_v) {
        fit.v_hat = std::move(*best_v);
    } else {
        fit.v_hat = soft_value_iteration(mdp, fit.r_hat, cfg.inner_tol, cfg.inner_max_iter).v;
    }
    return fit;
}

} // namespace ctrirl
