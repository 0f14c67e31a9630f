#include "ctrirl/features.hpp"

#include "ctrirl/error.hpp"

namespace ctrirl {

FeatureMap::FeatureMap(Index n_states, Index n_actions, Matrix phi)
    : n_states_(n_states), n_actions_(n_actions), phi_(std::move(phi)) {
    if (phi_.rows() != n_states * n_actions) throw ShapeError("FeatureMap: expected one row per state-action pair");
    if (phi_.cols() == 0) throw InvalidArgument("FeatureMap: zero feature dimension");
    if (!phi_.allFinite()) throw InvalidArgument("FeatureMap: non-finite feature");
}

FeatureMap FeatureMap::one_hot(Index n_states, Index n_actions) {
    return FeatureMap(n_states, n_actions, Matrix::Identity(n_states * n_actions, n_states * n_actions));
}

FeatureMap FeatureMap::per_action(const Matrix& state_basis, Index n_actions) {
    const Index S = state_basis.rows();
    const Index b = state_basis.cols();
    Matrix phi = Matrix::Zero(S * n_actions, b * n_actions);
    for (Index s = 0; s < S; ++s) {
        for (Index a = 0; a < n_actions; ++a) phi.block(s * n_actions + a, a * b, 1, b) = state_basis.row(s);
    }
    return FeatureMap(S, n_actions, std::move(phi));
}

StateActionFn FeatureMap::linear(const Vector& theta) const {
    if (theta.size() != dim()) throw ShapeError("FeatureMap::linear: weight dimension mismatch");
    Vector flat = phi_ * theta;
    return StateActionFn(Matrix(Eigen::Map<const Matrix>(flat.data(), n_states_, n_actions_)));
}

} // namespace ctrirl
