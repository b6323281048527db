"""Equivariant filtering for bearing-only ego-centric SLAM in the plane."""

from eqfslam.symmetry import (
    DomainError,
    GroupElement,
    S,
    adjoint,
    dphi_at_identity,
    dphi_right_inverse,
    lift,
    phi,
    psi,
    rotation_matrix,
    wrap_angle,
)
from eqfslam.engine import (
    FilterConfig,
    FilterState,
    NumericalInstabilityError,
    SystemModel,
    estimate,
    filter_update,
    initial_state,
)
from eqfslam.slam2d import slam2d_model
from eqfslam.sim import ScenarioConfig, RunRecord, run_experiment

__all__ = [
    "DomainError",
    "GroupElement",
    "S",
    "adjoint",
    "dphi_at_identity",
    "dphi_right_inverse",
    "lift",
    "phi",
    "psi",
    "rotation_matrix",
    "wrap_angle",
    "FilterConfig",
    "FilterState",
    "NumericalInstabilityError",
    "SystemModel",
    "estimate",
    "filter_update",
    "initial_state",
    "slam2d_model",
    "ScenarioConfig",
    "RunRecord",
    "run_experiment",
]
