#include "ctrirl/metrics.hpp"

#include "ctrirl/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ctrirl {

StateActionFn qdiff(const StateActionFn& q, Index ref_action) {
    if (ref_action < 0 || ref_action >= q.n_actions()) throw InvalidArgument("qdiff: reference action out of range");
    Matrix out = q.values();
    for (Index s = 0; s < out.rows(); ++s) out.row(s).array() -= q(s, ref_action);
    return StateActionFn(std::move(out));
}

EvalTruth make_truth(const TabularMdp& mdp, const StateActionFn& r_true) {
    SoftValueResult soft = soft_value_iteration(mdp, r_true, 1e-10, 1000000);
    return EvalTruth{&mdp, r_true, std::move(soft.q), std::move(soft.pi_star)};
}

std::array<double, 5> as_array(const MetricValues& m) { return {m.rmse_qdiff, m.corr_qdiff, m.kl, m.tv, m.top1}; }

std::vector<Index> argmax_rows(const Matrix& m) {
    std::vector<Index> out(static_cast<std::size_t>(m.rows()));
    for (Index s = 0; s < m.rows(); ++s) {
        Index best = 0;
        for (Index a = 1; a < m.cols(); ++a) {
            if (m(s, a) > m(s, best)) best = a;
        }
        out[static_cast<std::size_t>(s)] = best;
    }
    return out;
}

MetricValues evaluate(const EvalTruth& truth, const StateActionFn& q_hat, const StateDistribution& weighting,
                      Index ref_action) {
    const Index S = truth.q_true.n_states();
    const Index A = truth.q_true.n_actions();
    if (q_hat.n_states() != S || q_hat.n_actions() != A) throw ShapeError("evaluate: estimate shape differs from truth");
    if (weighting.size() != S) throw ShapeError("evaluate: weighting size differs from state count");
    if (!q_hat.all_finite()) throw InvalidArgument("evaluate: estimate has non-finite entries");

    const StateActionFn d_true = qdiff(truth.q_true, ref_action);
    const StateActionFn d_hat = qdiff(q_hat, ref_action);

    MetricValues m;
    if (A > 1) {
        // Weighted moments over (s, a != ref), each state's cells sharing weight w(s).
        double wsum = 0.0, mt = 0.0, mh = 0.0, sq = 0.0;
        for (Index s = 0; s < S; ++s) {
            for (Index a = 0; a < A; ++a) {
                if (a == ref_action) continue;
                const double w = weighting[s];
                wsum += w;
                mt += w * d_true(s, a);
                mh += w * d_hat(s, a);
                sq += w * (d_hat(s, a) - d_true(s, a)) * (d_hat(s, a) - d_true(s, a));
            }
        }
        mt /= wsum;
        mh /= wsum;
        m.rmse_qdiff = std::sqrt(sq / wsum);
        double ctt = 0.0, chh = 0.0, cth = 0.0;
        for (Index s = 0; s < S; ++s) {
            for (Index a = 0; a < A; ++a) {
                if (a == ref_action) continue;
                const double w = weighting[s];
                const double et = d_true(s, a) - mt;
                const double eh = d_hat(s, a) - mh;
                ctt += w * et * et;
                chh += w * eh * eh;
                cth += w * et * eh;
            }
        }
        if (ctt > 0.0 && chh > 0.0) {
            m.corr_qdiff = std::clamp(cth / std::sqrt(ctt * chh), -1.0, 1.0);
        } else {
            m.corr_qdiff = std::numeric_limits<double>::quiet_NaN();
            m.corr_defined = false;
        }
    } else {
        m.corr_qdiff = std::numeric_limits<double>::quiet_NaN();
        m.corr_defined = false;
    }

    const PolicyTable pi_hat = PolicyTable::softmax(q_hat);
    const StateFn lse = logsumexp_actions(q_hat);
    const Matrix& pe = truth.pi_expert.probs();
    const auto top_true = argmax_rows(pe);
    const auto top_hat = argmax_rows(pi_hat.probs());
    for (Index s = 0; s < S; ++s) {
        const double w = weighting[s];
        double kl = 0.0, tv = 0.0;
        for (Index a = 0; a < A; ++a) {
            // log pi-hat from the logits, so tiny probabilities do not underflow.
            if (pe(s, a) > 0.0) kl += pe(s, a) * (std::log(pe(s, a)) - (q_hat(s, a) - lse[s]));
            tv += std::abs(pe(s, a) - pi_hat(s, a));
        }
        m.kl += w * std::max(kl, 0.0);
        m.tv += w * 0.5 * tv;
        if (top_true[static_cast<std::size_t>(s)] == top_hat[static_cast<std::size_t>(s)]) m.top1 += w;
    }
    m.tv = std::clamp(m.tv, 0.0, 1.0);
    m.top1 = std::clamp(m.top1, 0.0, 1.0);
    return m;
}

Summary summarize(const std::vector<double>& values) {
    Summary out;
    double sum = 0.0;
    for (double v : values) {
        if (std::isfinite(v)) {
            sum += v;
            ++out.count;
        }
    }
    if (out.count == 0) {
        out.mean = out.se = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    out.mean = sum / static_cast<double>(out.count);
    if (out.count < 2) {
        out.se = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    double ss = 0.0;
    for (double v : values) {
        if (std::isfinite(v)) ss += (v - out.mean) * (v - out.mean);
    }
    const double n = static_cast<double>(out.count);
    out.se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    return out;
}

} // namespace ctrirl
