"""Discrete fractional Lagrangian systems and their Noether conservation laws."""

from fracnoether.dynamics import (
    BVPSolution,
    NonConvergence,
    SingularJacobian,
    SolverOptions,
    discrete_action,
    el_residual,
    solve_bvp,
)
from fracnoether.fracops import (
    DomainError,
    delta,
    delta_matrix,
    gl_coefficients,
    rl_derivative,
    rl_integral,
)
from fracnoether.model import (
    Grid,
    Lagrangian,
    SymmetryGroup,
    Trajectory,
    invariance_check,
    quadratic_lagrangian,
    rotation_group_2d,
    translation_group,
)
from fracnoether.noether import (
    ConservationReport,
    build_shift_matrix,
    conserved_quantity,
    conserved_quantity_direct,
    conserved_quantity_matrix,
    constancy_report,
    noether_inputs,
    shift,
)

__all__ = [
    "BVPSolution", "ConservationReport", "DomainError", "Grid", "Lagrangian",
    "NonConvergence", "SingularJacobian", "SolverOptions", "SymmetryGroup", "Trajectory",
    "build_shift_matrix", "conserved_quantity", "conserved_quantity_direct",
    "conserved_quantity_matrix", "constancy_report", "delta", "delta_matrix",
    "discrete_action", "el_residual", "gl_coefficients", "invariance_check",
    "noether_inputs", "quadratic_lagrangian", "rl_derivative", "rl_integral",
    "rotation_group_2d", "shift", "solve_bvp", "translation_group",
]
