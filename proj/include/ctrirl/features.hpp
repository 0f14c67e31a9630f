#pragma once

#include "ctrirl/mdp.hpp"

namespace ctrirl {

/// Feature vectors phi(s, a) of a fixed dimension, stored one row per
/// state-action pair at index s * n_actions + a.
class FeatureMap {
public:
    FeatureMap() = default;
    FeatureMap(Index n_states, Index n_actions, Matrix phi);

    /// phi(s, a) = e_{s * n_actions + a}.
    static FeatureMap one_hot(Index n_states, Index n_actions);
    /// phi(s, a) = e_a (x) basis(s): one copy of the state basis per action.
    static FeatureMap per_action(const Matrix& state_basis, Index n_actions);

    Index n_states() const noexcept { return n_states_; }
    Index n_actions() const noexcept { return n_actions_; }
    Index dim() const noexcept { return phi_.cols(); }
    const Matrix& matrix() const noexcept { return phi_; }
    auto row(Index s, Index a) const { return phi_.row(s * n_actions_ + a); }

    /// <theta, phi(s, a)> as a state-action table.
    StateActionFn linear(const Vector& theta) const;

private:
    Index n_states_ = 0;
    Index n_actions_ = 0;
    Matrix phi_;
};

} // namespace ctrirl
