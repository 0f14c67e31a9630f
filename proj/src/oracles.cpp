#include "ctrirl/oracles.hpp"

#include "ctrirl/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace ctrirl {

namespace {

void apply_floor(Matrix& probs, double floor) {
    for (Index s = 0; s < probs.rows(); ++s) {
        probs.row(s) = probs.row(s).cwiseMax(floor);
        probs.row(s) /= probs.row(s).sum();
    }
}

Matrix tabular_probs(const ClassifierSpec& spec, const Matrix& counts, ClassifierDiagnostics& diag) {
    const Index A = counts.cols();
    Matrix probs(counts.rows(), A);
    for (Index s = 0; s < counts.rows(); ++s) {
        const double total = counts.row(s).sum();
        if (total <= 0.0) diag.unvisited_states.push_back(s);
        const double denom = total + spec.smoothing_alpha * static_cast<double>(A);
        if (denom > 0.0 && std::isfinite(denom)) {
            probs.row(s) = (counts.row(s).array() + spec.smoothing_alpha) / denom;
        } else {
            probs.row(s).setConstant(1.0 / static_cast<double>(A));
        }
    }
    // Empirical conditional cross-entropy of the unfloored fit.
    const double n = counts.sum();
    double loss = 0.0;
    for (Index s = 0; s < counts.rows(); ++s) {
        for (Index a = 0; a < A; ++a) {
            if (counts(s, a) > 0.0) loss -= counts(s, a) / n * std::log(probs(s, a));
        }
    }
    diag.final_loss = loss;
    diag.loss_trace = {loss};
    return probs;
}

// Softmax-linear model evaluated on aggregated (s, a) frequencies.
class LogisticObjective {
public:
    LogisticObjective(const FeatureMap& phi, Matrix freq, double l2)
        : phi_(phi), freq_(std::move(freq)), state_mass_(freq_.rowwise().sum()), l2_(l2) {}

    Matrix probs(const Vector& w) const {
        StateActionFn logits = phi_.linear(w);
        return PolicyTable::softmax(logits).probs();
    }

    double loss(const Vector& w) const {
        const StateActionFn logits = phi_.linear(w);
        const StateFn lse = logsumexp_actions(logits);
        double total = 0.5 * l2_ * w.squaredNorm();
        for (Index s = 0; s < freq_.rows(); ++s) {
            if (state_mass_[s] <= 0.0) continue;
            for (Index a = 0; a < freq_.cols(); ++a) {
                if (freq_(s, a) > 0.0) total -= freq_(s, a) * (logits(s, a) - lse[s]);
            }
        }
        return total;
    }

    Vector gradient(const Vector& w, const Matrix& p) const {
        Vector g = l2_ * w;
        for (Index s = 0; s < freq_.rows(); ++s) {
            if (state_mass_[s] <= 0.0) continue;
            for (Index a = 0; a < freq_.cols(); ++a) {
                const double coeff = state_mass_[s] * p(s, a) - freq_(s, a);
                if (coeff != 0.0) g += coeff * phi_.row(s, a).transpose();
            }
        }
        return g;
    }

    Matrix hessian(const Matrix& p) const {
        const Index d = phi_.dim();
        Matrix h = l2_ * Matrix::Identity(d, d);
        Vector mean(d);
        for (Index s = 0; s < freq_.rows(); ++s) {
            if (state_mass_[s] <= 0.0) continue;
            mean.setZero();
            for (Index a = 0; a < freq_.cols(); ++a) {
                auto f = phi_.row(s, a).transpose();
                h.noalias() += state_mass_[s] * p(s, a) * f * f.transpose();
                mean += p(s, a) * f;
            }
            h.noalias() -= state_mass_[s] * mean * mean.transpose();
        }
        return h;
    }

private:
    const FeatureMap& phi_;
    Matrix freq_;
    Vector state_mass_;
    double l2_;
};

[[noreturn]] void diverged(const std::vector<double>& trace) {
    std::ostringstream msg;
    msg << "fit_classifier: logistic loss diverged; trace:";
    const std::size_t start = trace.size() > 10 ? trace.size() - 10 : 0;
    for (std::size_t i = start; i < trace.size(); ++i) msg << ' ' << trace[i];
    throw Error(msg.str());
}

Matrix logistic_newton(const ClassifierSpec& spec, const LogisticObjective& objective, Index dim,
                       ClassifierDiagnostics& diag) {
    Vector w = Vector::Zero(dim);
    double current = objective.loss(w);
    diag.loss_trace.push_back(current);
    for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
        const Matrix p = objective.probs(w);
        const Vector g = objective.gradient(w, p);
        if (g.norm() < 1e-12) break;
        const Vector step = objective.hessian(p).ldlt().solve(-g);
        const double slope = g.dot(step);
        double t = 1.0;
        double trial = objective.loss(w + t * step);
        for (int halving = 0; halving < 60 && !(trial <= current + 1e-4 * t * slope); ++halving) {
            t *= 0.5;
            trial = objective.loss(w + t * step);
        }
        if (!std::isfinite(trial)) diverged(diag.loss_trace);
        ++diag.epochs_run;
        const double improvement = current - trial;
        if (improvement < 0.0) break;
        w += t * step;
        current = trial;
        diag.loss_trace.push_back(current);
        if (improvement < 1e-9) break;
    }
    diag.final_loss = current;
    return objective.probs(w);
}

Matrix logistic_gradient_descent(const ClassifierSpec& spec, const LogisticObjective& objective,
                                 const FeatureMap& phi, const TransitionDataset& data, ClassifierDiagnostics& diag) {
    double lipschitz = 0.0;
    for (Index i = 0; i < phi.matrix().rows(); ++i) lipschitz = std::max(lipschitz, phi.matrix().row(i).squaredNorm());
    const double step = spec.step_size > 0.0 ? spec.step_size : 0.5 / (1.0 + lipschitz);

    Vector w = Vector::Zero(phi.dim());
    double current = objective.loss(w);
    diag.loss_trace.push_back(current);

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(spec.shuffle_seed);

    for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
        if (spec.batch_size == 0 || spec.batch_size >= data.size()) {
            w -= step * objective.gradient(w, objective.probs(w));
        } else {
            std::shuffle(order.begin(), order.end(), rng);
            for (std::size_t begin = 0; begin < order.size(); begin += spec.batch_size) {
                const std::size_t end = std::min(order.size(), begin + spec.batch_size);
                Matrix freq = Matrix::Zero(phi.n_states(), phi.n_actions());
                double mass = 0.0;
                for (std::size_t k = begin; k < end; ++k) {
                    const auto& t = data.records()[order[k]];
                    freq(t.s, t.a) += data.weight(order[k]);
                    mass += data.weight(order[k]);
                }
                if (mass <= 0.0) continue;
                LogisticObjective batch(phi, Matrix(freq / mass), spec.l2);
                w -= step * batch.gradient(w, batch.probs(w));
            }
        }
        const double next = objective.loss(w);
        diag.loss_trace.push_back(next);
        ++diag.epochs_run;
        if (!std::isfinite(next)) diverged(diag.loss_trace);
        const double improvement = current - next;
        current = next;
        if (improvement >= 0.0 && improvement < 1e-9) break;
    }
    diag.final_loss = current;
    return objective.probs(w);
}

} // namespace

FittedClassifier fit_classifier(const ClassifierSpec& spec, const TransitionDataset& data) {
    if (data.empty()) throw InvalidArgument("fit_classifier: empty dataset");
    const Index A = data.meta().n_actions;
    if (!(spec.prob_floor > 0.0 && spec.prob_floor < 1.0 / static_cast<double>(A))) {
        throw InvalidArgument("fit_classifier: prob_floor must lie in (0, 1/|A|)");
    }
    if (spec.smoothing_alpha < 0.0) throw InvalidArgument("fit_classifier: smoothing_alpha must be >= 0");

    const Matrix counts = count_table(data);
    if (!(counts.sum() > 0.0)) throw InvalidArgument("fit_classifier: dataset has zero total weight");

    ClassifierDiagnostics diag;
    Matrix probs;
    if (spec.kind == ClassifierKind::TabularCount) {
        probs = tabular_probs(spec, counts, diag);
    } else {
        if (!spec.features) throw InvalidArgument("fit_classifier: logistic classifier needs a feature map");
        const FeatureMap& phi = *spec.features;
        if (phi.n_states() != data.meta().n_states || phi.n_actions() != A) {
            throw ShapeError("fit_classifier: feature map shape differs from dataset");
        }
        if (spec.l2 < 0.0) throw InvalidArgument("fit_classifier: l2 must be >= 0");
        for (Index s = 0; s < counts.rows(); ++s) {
            if (counts.row(s).sum() <= 0.0) diag.unvisited_states.push_back(s);
        }
        LogisticObjective objective(phi, Matrix(counts / counts.sum()), spec.l2);
        probs = spec.optimizer == LogisticOptimizer::Newton
                    ? logistic_newton(spec, objective, phi.dim(), diag)
                    : logistic_gradient_descent(spec, objective, phi, data, diag);
    }
    apply_floor(probs, spec.prob_floor);
    return FittedClassifier{PolicyTable(std::move(probs)), spec.prob_floor, std::move(diag)};
}

StateActionFn log_policy(const FittedClassifier& classifier) { return classifier.probs.log(); }

// ---------------------------------------------------------------------------

FittedRegressor fit_regressor(const RegressorSpec& spec, std::span<const RegressionSample> samples, Index n_states,
                              Index n_actions) {
    if (samples.empty()) throw InvalidArgument("fit_regressor: no training samples");
    if (!std::isfinite(spec.fallback)) throw InvalidArgument("fit_regressor: fallback must be finite");
    if (spec.ridge_lambda < 0.0) throw InvalidArgument("fit_regressor: ridge_lambda must be >= 0");

    Matrix mass = Matrix::Zero(n_states, n_actions);
    Matrix sums = Matrix::Zero(n_states, n_actions);
    for (const auto& x : samples) {
        if (x.s < 0 || x.s >= n_states || x.a < 0 || x.a >= n_actions) {
            throw InvalidArgument("fit_regressor: sample index out of range");
        }
        if (!std::isfinite(x.y)) throw InvalidArgument("fit_regressor: non-finite target");
        mass(x.s, x.a) += x.weight;
        sums(x.s, x.a) += x.weight * x.y;
    }
    const double total = mass.sum();
    if (!(total > 0.0)) throw InvalidArgument("fit_regressor: zero total sample weight");

    FittedRegressor model;
    model.kind = spec.kind;
    model.n_states = n_states;
    model.n_actions = n_actions;
    for (Index s = 0; s < n_states; ++s) {
        for (Index a = 0; a < n_actions; ++a) model.diagnostics.unvisited_cells += mass(s, a) > 0.0 ? 0 : 1;
    }

    if (spec.kind == RegressorKind::TabularMean) {
        model.table = Matrix::Constant(n_states, n_actions, spec.fallback);
        for (Index s = 0; s < n_states; ++s) {
            for (Index a = 0; a < n_actions; ++a) {
                if (mass(s, a) > 0.0) model.table(s, a) = sums(s, a) / mass(s, a);
            }
        }
    } else {
        if (!spec.features) throw InvalidArgument("fit_regressor: ridge regression needs a feature map");
        const FeatureMap& phi = *spec.features;
        if (phi.n_states() != n_states || phi.n_actions() != n_actions) {
            throw ShapeError("fit_regressor: feature map shape differs");
        }
        const Index d = phi.dim();
        Matrix gram = spec.ridge_lambda * Matrix::Identity(d, d);
        Vector rhs = Vector::Zero(d);
        for (Index s = 0; s < n_states; ++s) {
            for (Index a = 0; a < n_actions; ++a) {
                if (mass(s, a) <= 0.0) continue;
                auto f = phi.row(s, a).transpose();
                gram.noalias() += (mass(s, a) / total) * f * f.transpose();
                rhs += (sums(s, a) / total) * f;
            }
        }
        if (spec.ridge_lambda == 0.0) {
            Eigen::FullPivLU<Matrix> lu(gram);
            if (!lu.isInvertible()) {
                throw Error("fit_regressor: normal equations are rank deficient (rank " + std::to_string(lu.rank()) +
                            " of " + std::to_string(d) + "); use ridge_lambda > 0");
            }
            model.weights = lu.solve(rhs);
        } else {
            model.weights = gram.llt().solve(rhs);
        }
        model.features = spec.features;
    }

    double sq = 0.0;
    for (const auto& x : samples) {
        const double e = predict(model, x.s, x.a) - x.y;
        sq += x.weight * e * e;
    }
    model.diagnostics.train_rmse = std::sqrt(sq / total);
    return model;
}

double predict(const FittedRegressor& model, Index s, Index a) {
    if (s < 0 || s >= model.n_states || a < 0 || a >= model.n_actions) {
        throw InvalidArgument("predict: index (" + std::to_string(s) + ", " + std::to_string(a) + ") out of range");
    }
    if (model.kind == RegressorKind::TabularMean) return model.table(s, a);
    return model.features->row(s, a).dot(model.weights);
}

StateActionFn predict_table(const FittedRegressor& model) {
    if (model.kind == RegressorKind::TabularMean) return StateActionFn(model.table);
    return model.features->linear(model.weights);
}

std::string to_string(ClassifierKind k) {
    return k == ClassifierKind::TabularCount ? "tabular-count" : "multinomial-logistic";
}

std::string to_string(RegressorKind k) { return k == RegressorKind::TabularMean ? "tabular-mean" : "ridge"; }

ClassifierKind parse_classifier_kind(std::string_view text) {
    if (text == "tabular-count") return ClassifierKind::TabularCount;
    if (text == "multinomial-logistic") return ClassifierKind::MultinomialLogistic;
    throw InvalidArgument("unknown classifier '" + std::string(text) + "' (tabular-count|multinomial-logistic)");
}

RegressorKind parse_regressor_kind(std::string_view text) {
    if (text == "tabular-mean") return RegressorKind::TabularMean;
    if (text == "ridge") return RegressorKind::Ridge;
    throw InvalidArgument("unknown regressor '" + std::string(text) + "' (tabular-mean|ridge)");
}

LogisticOptimizer parse_logistic_optimizer(std::string_view text) {
    if (text == "newton") return LogisticOptimizer::Newton;
    if (text == "gradient-descent") return LogisticOptimizer::GradientDescent;
    throw InvalidArgument("unknown logistic optimizer '" + std::string(text) + "' (newton|gradient-descent)");
}

} // namespace ctrirl
