"""Tabular reward recovery by classification and iterated regression."""

from ._ctrirl import (
    ConvergenceError,
    Dataset,
    Error,
    Gridworld,
    InvalidArgument,
    ParseError,
    ShapeError,
    Solution,
    TabularMdp,
    auto_iterations,
    build_env,
    cli_main,
    evaluate,
    exact_solver,
    expert_policy,
    maxent_fit,
    read_dataset,
    read_solution,
    reproduce,
    sample,
    shape,
    soft_bellman_residual,
    soft_value_iteration,
    solve,
)

__all__ = [name for name in dir() if not name.startswith("_")]
