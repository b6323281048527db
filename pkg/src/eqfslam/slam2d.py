"""Derotated ego-centric bearing SLAM in the plane.

Landmarks are expressed in the body frame of a robot moving with velocity
``v``; each point obeys ``x_i' = -v`` and the camera reports the bearing
``x_i / |x_i|``. The extended system gives every landmark its own velocity
``v_i`` so that the symmetry group acts on inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from eqfslam import symmetry as sym
from eqfslam.engine import SystemModel
from eqfslam.symmetry import S, GroupElement


def embed_velocity(v, n: int) -> np.ndarray:
    """Extended velocity (v, ..., v) for a common robot velocity ``v``."""
    return np.tile(np.asarray(v, dtype=float).reshape(1, 2), (n, 1))


def dynamics(xi, v) -> np.ndarray:
    xi = np.asarray(xi, dtype=float).reshape(-1, 2)
    v = np.asarray(v, dtype=float).reshape(-1, 2)
    if xi.shape != v.shape:
        raise sym.DimensionError(f"state {xi.shape} and velocity {v.shape} differ")
    return -v


def flow(xi, v, dt: float) -> np.ndarray:
    """Exact landmark motion over ``dt`` with ``v`` held constant."""
    return sym.as_state(np.asarray(xi, dtype=float) - dt * np.asarray(v, dtype=float).reshape(-1, 2))


def measure(xi) -> np.ndarray:
    xi = sym.as_state(xi)
    return xi / np.linalg.norm(xi, axis=1, keepdims=True)


def analytic_A_blocks(origin, v_origin) -> np.ndarray:
    """2x2 blocks of the linearised error drift about ``origin``.

    Written in terms of the point velocity ``w_i = -v_i`` (the rate at which
    a landmark moves in the body frame).
    """
    x = sym.as_state(origin)
    w = -np.asarray(v_origin, dtype=float).reshape(x.shape)
    sq = np.einsum("ij,ij->i", x, x)
    Sx = x @ S.T
    Sw = w @ S.T
    x_S_w = np.einsum("ij,ij->i", x, Sw)
    x_w = np.einsum("ij,ij->i", x, w)
    outer = lambda a, b: np.einsum("ni,nj->nij", a, b)  # noqa: E731
    blocks = (sq[:, None, None] * (-outer(Sx, Sw) + outer(x, w))
              + 2.0 * x_S_w[:, None, None] * outer(Sx, x)
              - 2.0 * x_w[:, None, None] * outer(x, x))
    return blocks / (sq ** 2)[:, None, None]


def analytic_C_blocks(origin, X_hat: GroupElement) -> np.ndarray:
    """R(theta_hat_i)^T (I - x x^T / |x|^2) / |x|; the observer scale drops out."""
    x = sym.as_state(origin)
    sq = np.einsum("ij,ij->i", x, x)
    proj = np.eye(2)[None] - np.einsum("ni,nj->nij", x, x) / sq[:, None, None]
    Rt = np.swapaxes(sym.rotation_matrix(X_hat.theta), -1, -2)
    return Rt @ proj / np.sqrt(sq)[:, None, None]


def slam2d_model(origin) -> SystemModel:
    return SystemModel(
        origin=origin,
        dynamics=dynamics,
        output=measure,
        analytic_A=analytic_A_blocks,
        analytic_C=analytic_C_blocks,
        flow=flow,
    )


def excitation_integrand(v_trace, x_traces) -> np.ndarray:
    """Samples of (v^T S x_i)^2, shape ``(T, n)``.

    ``v_trace`` is ``(T, 2)`` for a common velocity or ``(T, n, 2)``.
    """
    x = np.asarray(x_traces, dtype=float)
    v = np.asarray(v_trace, dtype=float)
    if v.ndim == 2:
        v = v[:, None, :]
    return np.einsum("tni,ij,tnj->tn", np.broadcast_to(v, x.shape), S, x) ** 2


@dataclass(frozen=True)
class ExcitationReport:
    t_start: np.ndarray      # (W,) window start times
    averages: np.ndarray     # (W, n) windowed means of the integrand
    window: float
    threshold: float

    @property
    def below(self) -> np.ndarray:
        return self.averages < self.threshold

    @property
    def satisfied(self) -> bool:
        return not self.below.any()

    @property
    def min_average(self) -> np.ndarray:
        return self.averages.min(axis=0)


def excitation_metric(v_trace, x_traces, dt: float, window: float = np.pi,
                      threshold: float = 0.01) -> ExcitationReport:
    """Sliding-window trapezoidal averages of the persistence-of-excitation integrand."""
    g = excitation_integrand(v_trace, x_traces)
    T = g.shape[0]
    k = int(round(window / dt))
    if k < 1 or k > T - 1:
        raise ValueError(f"window {window} s needs {k} steps but the trace spans only {T - 1}")
    # cumulative trapezoid so every window is a difference of two entries
    cum = np.concatenate([np.zeros((1, g.shape[1])), np.cumsum(0.5 * dt * (g[1:] + g[:-1]), axis=0)])
    averages = (cum[k:] - cum[:-k]) / (k * dt)
    return ExcitationReport(np.arange(T - k) * dt, averages, k * dt, threshold)
