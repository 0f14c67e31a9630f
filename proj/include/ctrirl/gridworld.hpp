#pragma once

// Gridworld benchmark domains, expert demonstrations and samplers.

#include "ctrirl/dataset.hpp"
#include "ctrirl/features.hpp"
#include "ctrirl/mdp.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace ctrirl {

enum class Topology { Torus, Bounded };

/// How the ground-truth reward is generated, and which features the linear
/// baseline sees.
///  - Linear: r = <theta, phi> with phi = per-action (1, x, y, indicator cells...).
///  - TabularLinear: an arbitrary table, i.e. linear in one-hot (s, a) features.
///  - Nonlinear: sinusoidal mixtures of the coordinates with action interactions;
///    the baseline only sees per-action (1, x, y), so it cannot represent r.
enum class RewardKind { Linear, TabularLinear, Nonlinear };

enum class GridAction : Index { Stay = 0, Up = 1, Down = 2, Left = 3, Right = 4 };
inline constexpr Index kGridActions = 5;

struct GridworldSpec {
    Index width = 8;
    Index height = 8;
    Topology topology = Topology::Bounded;
    RewardKind reward_kind = RewardKind::TabularLinear;
    /// Per-action state-basis size for the Linear kind: 3 gives (1, x, y);
    /// every extra unit adds one seeded indicator cell. Ignored otherwise.
    Index feature_dim = 3;
    std::uint64_t seed = 0;
    double gamma = 0.97;
    double reward_scale = 1.0;
};

struct Gridworld {
    GridworldSpec spec;
    TabularMdp mdp;
    StateActionFn r_true;
    FeatureMap features;

    Index state(Index x, Index y) const { return y * spec.width + x; }
    Index x_of(Index s) const { return s % spec.width; }
    Index y_of(Index s) const { return s / spec.width; }
};

Gridworld build_env(const GridworldSpec& spec);

std::string to_string(Topology t);
std::string to_string(RewardKind k);
Topology parse_topology(std::string_view text);
RewardKind parse_reward_kind(std::string_view text);
/// Short identifier recorded in dataset headers, e.g. "grid8x8-bounded-tabular-linear".
std::string env_id(const GridworldSpec& spec);

/// Softmax-optimal policy for reward r (soft value iteration to 1e-10).
PolicyTable expert_policy(const TabularMdp& mdp, const StateActionFn& r_true);

enum class SamplingRegime {
    /// Each step continues the rollout with probability gamma, otherwise restarts
    /// from `init`: records follow the normalized discounted occupancy.
    IidRestart,
    /// One long chain from a single draw of `init`.
    Trajectory,
};

std::string to_string(SamplingRegime r);
SamplingRegime parse_sampling_regime(std::string_view text);

TransitionDataset sample_transitions(const TabularMdp& mdp, const PolicyTable& pi, std::size_t n,
                                     const StateDistribution& init, SamplingRegime regime, std::uint64_t seed,
                                     std::string env_id = "custom");

} // namespace ctrirl
