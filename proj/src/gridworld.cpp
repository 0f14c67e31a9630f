#include "ctrirl/gridworld.hpp"

#include "ctrirl/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

namespace ctrirl {

namespace {

constexpr Index kDx[kGridActions] = {0, 0, 0, -1, 1};
constexpr Index kDy[kGridActions] = {0, -1, 1, 0, 0};

// Coordinates scaled to [-1, 1].
double centered(Index i, Index extent) {
    return extent > 1 ? 2.0 * static_cast<double>(i) / static_cast<double>(extent - 1) - 1.0 : 0.0;
}

Matrix grid_kernel(const GridworldSpec& spec) {
    const Index W = spec.width;
    const Index H = spec.height;
    const Index S = W * H;
    Matrix t = Matrix::Zero(S * kGridActions, S);
    for (Index y = 0; y < H; ++y) {
        for (Index x = 0; x < W; ++x) {
            const Index s = y * W + x;
            for (Index a = 0; a < kGridActions; ++a) {
                Index nx = x + kDx[a];
                Index ny = y + kDy[a];
                if (spec.topology == Topology::Torus) {
                    nx = (nx + W) % W;
                    ny = (ny + H) % H;
                } else if (nx < 0 || nx >= W || ny < 0 || ny >= H) {
                    nx = x;
                    ny = y;
                }
                t(s * kGridActions + a, ny * W + nx) = 1.0;
            }
        }
    }
    return t;
}

Matrix coordinate_basis(const GridworldSpec& spec) {
    const Index S = spec.width * spec.height;
    Matrix basis(S, 3);
    for (Index s = 0; s < S; ++s) {
        basis(s, 0) = 1.0;
        basis(s, 1) = centered(s % spec.width, spec.width);
        basis(s, 2) = centered(s / spec.width, spec.height);
    }
    return basis;
}

Matrix linear_basis(const GridworldSpec& spec, std::mt19937_64& rng) {
    const Index S = spec.width * spec.height;
    const Index extra = spec.feature_dim - 3;
    if (extra < 0) throw InvalidArgument("build_env: linear rewards need feature_dim >= 3");
    if (extra > S) throw InvalidArgument("build_env: more indicator cells than states");
    Matrix basis = Matrix::Zero(S, spec.feature_dim);
    basis.leftCols(3) = coordinate_basis(spec);
    std::set<Index> cells;
    std::uniform_int_distribution<Index> pick(0, S - 1);
    while (static_cast<Index>(cells.size()) < extra) cells.insert(pick(rng));
    Index column = 3;
    for (Index cell : cells) basis(cell, column++) = 1.0;
    return basis;
}

StateActionFn nonlinear_reward(const GridworldSpec& spec, std::mt19937_64& rng) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    std::uniform_real_distribution<double> phase(0.0, two_pi);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double p1 = phase(rng), p2 = phase(rng), p3 = phase(rng);
    double amp[kGridActions], psi[kGridActions], chi[kGridActions];
    for (Index a = 0; a < kGridActions; ++a) {
        amp[a] = gauss(rng);
        psi[a] = phase(rng);
        chi[a] = phase(rng);
    }
    const Index S = spec.width * spec.height;
    StateActionFn r(S, kGridActions);
    for (Index s = 0; s < S; ++s) {
        const double tx = two_pi * static_cast<double>(s % spec.width) / static_cast<double>(spec.width);
        const double ty = two_pi * static_cast<double>(s / spec.width) / static_cast<double>(spec.height);
        const double base = std::sin(2.0 * tx + p1) * std::cos(2.0 * ty + p2) + 0.5 * std::cos(3.0 * tx - 2.0 * ty + p3);
        for (Index a = 0; a < kGridActions; ++a) {
            r(s, a) = spec.reward_scale * (base + amp[a] * std::sin(2.0 * tx + psi[a]) * std::sin(2.0 * ty + chi[a]));
        }
    }
    return r;
}

} // namespace

Gridworld build_env(const GridworldSpec& spec) {
    if (spec.width <= 0 || spec.height <= 0) throw InvalidArgument("build_env: grid must have positive width and height");
    const Index S = spec.width * spec.height;
    TabularMdp mdp(S, kGridActions, grid_kernel(spec), spec.gamma);

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    switch (spec.reward_kind) {
    case RewardKind::Linear: {
        FeatureMap phi = FeatureMap::per_action(linear_basis(spec, rng), kGridActions);
        Vector theta(phi.dim());
        for (Index i = 0; i < theta.size(); ++i) theta[i] = spec.reward_scale * gauss(rng);
        StateActionFn r = phi.linear(theta);
        return Gridworld{spec, std::move(mdp), std::move(r), std::move(phi)};
    }
    case RewardKind::TabularLinear: {
        StateActionFn r(S, kGridActions);
        for (Index s = 0; s < S; ++s) {
            for (Index a = 0; a < kGridActions; ++a) r(s, a) = spec.reward_scale * gauss(rng);
        }
        return Gridworld{spec, std::move(mdp), std::move(r), FeatureMap::one_hot(S, kGridActions)};
    }
    case RewardKind::Nonlinear: {
        StateActionFn r = nonlinear_reward(spec, rng);
        return Gridworld{spec, std::move(mdp), std::move(r),
                         FeatureMap::per_action(coordinate_basis(spec), kGridActions)};
    }
    }
    throw InvalidArgument("build_env: unknown reward kind");
}

std::string to_string(Topology t) { return t == Topology::Torus ? "torus" : "bounded"; }

std::string to_string(RewardKind k) {
    switch (k) {
    case RewardKind::Linear: return "linear";
    case RewardKind::TabularLinear: return "tabular-linear";
    case RewardKind::Nonlinear: return "nonlinear";
    }
    return "unknown";
}

Topology parse_topology(std::string_view text) {
    if (text == "torus") return Topology::Torus;
    if (text == "bounded") return Topology::Bounded;
    throw InvalidArgument("unknown topology '" + std::string(text) + "' (torus|bounded)");
}

RewardKind parse_reward_kind(std::string_view text) {
    if (text == "linear") return RewardKind::Linear;
    if (text == "tabular-linear") return RewardKind::TabularLinear;
    if (text == "nonlinear") return RewardKind::Nonlinear;
    throw InvalidArgument("unknown reward kind '" + std::string(text) + "' (linear|tabular-linear|nonlinear)");
}

std::string env_id(const GridworldSpec& spec) {
    return "grid" + std::to_string(spec.width) + "x" + std::to_string(spec.height) + "-" + to_string(spec.topology) +
           "-" + to_string(spec.reward_kind);
}

PolicyTable expert_policy(const TabularMdp& mdp, const StateActionFn& r_true) {
    return soft_value_iteration(mdp, r_true, 1e-10, 1000000).pi_star;
}

std::string to_string(SamplingRegime r) { return r == SamplingRegime::IidRestart ? "iid-restart" : "trajectory"; }

SamplingRegime parse_sampling_regime(std::string_view text) {
    if (text == "iid-restart") return SamplingRegime::IidRestart;
    if (text == "trajectory") return SamplingRegime::Trajectory;
    throw InvalidArgument("unknown sampling regime '" + std::string(text) + "' (iid-restart|trajectory)");
}

namespace {

// Inverse-CDF draw restricted to entries with positive mass.
Index draw(const auto& probs, double u) {
    const Index n = probs.size();
    double cumulative = 0.0;
    Index last_positive = -1;
    for (Index i = 0; i < n; ++i) {
        if (probs[i] <= 0.0) continue;
        last_positive = i;
        cumulative += probs[i];
        if (u < cumulative) return i;
    }
    return last_positive;
}

} // namespace

TransitionDataset sample_transitions(const TabularMdp& mdp, const PolicyTable& pi, std::size_t n,
                                     const StateDistribution& init, SamplingRegime regime, std::uint64_t seed,
                                     std::string env) {
    if (pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions()) {
        throw ShapeError("sample_transitions: policy shape differs from MDP");
    }
    if (init.size() != mdp.n_states()) throw ShapeError("sample_transitions: initial distribution size differs");
    if (n == 0) throw InvalidArgument("sample_transitions: n must be at least 1");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Transition> records;
    records.reserve(n);

    Index s = draw(init.weights(), unit(rng));
    for (std::size_t i = 0; i < n; ++i) {
        const Index a = draw(pi.probs().row(s), unit(rng));
        const Index next = draw(mdp.transition().row(s * mdp.n_actions() + a), unit(rng));
        records.push_back({s, a, next});
        if (regime == SamplingRegime::Trajectory || unit(rng) < mdp.gamma()) {
            s = next;
        } else {
            s = draw(init.weights(), unit(rng));
        }
    }
    return TransitionDataset(DatasetMeta{std::move(env), seed, mdp.n_states(), mdp.n_actions()}, std::move(records));
}

} // namespace ctrirl
