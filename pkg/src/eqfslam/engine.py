"""Equivariant Filter on the product group (S^1 x R+)^n.

The filter keeps its state on the symmetry group and linearises the global
error ``e = phi(Xhat^{-1}, xi)`` about a fixed origin. The Riccati matrix is
held as ``n`` independent 2x2 blocks; every model matrix passed around here
is block diagonal with 2x2 blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.linalg import block_diag

from eqfslam import symmetry as sym
from eqfslam.symmetry import GroupElement

FD_STEP = 1e-6
PD_FLOOR = 1e-12
RICCATI_SCHEMES = ("sampled", "euler")
OBSERVER_INTEGRATORS = ("euler", "lie_euler", "exact_hold")


class NumericalInstabilityError(ArithmeticError):
    """Riccati matrix left the positive definite cone, or a scale hit zero."""


def subtraction_chart(e, origin) -> np.ndarray:
    """Local coordinates ``e - origin`` flattened to R^{2n}."""
    return (np.asarray(e, dtype=float) - np.asarray(origin, dtype=float)).ravel()


def subtraction_chart_inverse(eps, origin) -> np.ndarray:
    origin = np.asarray(origin, dtype=float)
    return sym.as_state(origin + np.asarray(eps, dtype=float).reshape(origin.shape))


@dataclass(frozen=True)
class SystemModel:
    """Hooks describing an equivariant system about a fixed origin.

    ``analytic_A`` / ``analytic_C`` are optional; when absent the engine
    falls back to central finite differences of the error dynamics and of
    the output in chart coordinates. ``flow(xi, v, dt)``, when given, is the
    exact solution of the dynamics over ``dt`` with ``v`` held constant and
    enables the ``"exact_hold"`` observer integrator.
    """

    origin: np.ndarray
    dynamics: Callable
    output: Callable
    phi: Callable = sym.phi
    psi: Callable = sym.psi
    lift: Callable = sym.lift
    adjoint: Callable = sym.adjoint
    dphi_at_identity: Callable = sym.dphi_at_identity
    dphi_right_inverse: Callable = sym.dphi_right_inverse
    chart: Callable = subtraction_chart
    chart_inverse: Callable = subtraction_chart_inverse
    analytic_A: Optional[Callable] = None
    analytic_C: Optional[Callable] = None
    flow: Optional[Callable] = None

    def __post_init__(self):
        origin = sym.as_state(self.origin).copy()
        origin.setflags(write=False)
        object.__setattr__(self, "origin", origin)

    @property
    def n(self) -> int:
        return self.origin.shape[0]

    def without_analytic(self) -> SystemModel:
        return replace(self, analytic_A=None, analytic_C=None)


def _check_spd(name, M, tol=1e-10):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {M.shape}")
    if not np.allclose(M, M.T, atol=tol, rtol=0.0):
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(M).min() <= 0.0:
        raise ValueError(f"{name} must be positive definite")
    return M


def diag_blocks(M, k: int = 2) -> np.ndarray:
    """Extract the ``k x k`` diagonal blocks of a block-diagonal matrix."""
    M = np.asarray(M, dtype=float)
    n = M.shape[0] // k
    blocks = np.stack([M[i * k:(i + 1) * k, i * k:(i + 1) * k] for i in range(n)])
    if not np.allclose(block_diag(*blocks), M, rtol=0.0, atol=1e-12 * max(1.0, np.abs(M).max())):
        raise ValueError("matrix is not block diagonal with 2x2 blocks")
    return blocks


@dataclass(frozen=True)
class FilterConfig:
    """Gains and step for the filter. ``P``, ``Q``, ``sigma0`` are dense 2n x 2n."""

    P: np.ndarray
    Q: np.ndarray
    sigma0: np.ndarray
    dt: float
    integrator: str = "euler"
    riccati: str = "sampled"
    P_blocks: np.ndarray = field(init=False, repr=False, compare=False)
    Q_blocks: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("P", "Q", "sigma0"):
            object.__setattr__(self, name, _check_spd(name, getattr(self, name)))
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.integrator not in OBSERVER_INTEGRATORS:
            raise ValueError(f"integrator must be one of {OBSERVER_INTEGRATORS}, got {self.integrator!r}")
        if self.riccati not in RICCATI_SCHEMES:
            raise ValueError(f"riccati must be one of {RICCATI_SCHEMES}, got {self.riccati!r}")
        if not (self.P.shape == self.Q.shape == self.sigma0.shape):
            raise ValueError("P, Q and sigma0 must share a shape")
        object.__setattr__(self, "P_blocks", diag_blocks(self.P))
        object.__setattr__(self, "Q_blocks", diag_blocks(self.Q))

    @classmethod
    def isotropic(cls, n: int, p: float, q: float, sigma0: float, dt: float, **kw) -> FilterConfig:
        eye = np.eye(2 * n)
        return cls(p * eye, q * eye, sigma0 * eye, dt, **kw)


@dataclass(frozen=True)
class FilterState:
    X: GroupElement
    sigma: np.ndarray  # (n, 2, 2)
    t: float = 0.0

    @property
    def sigma_dense(self) -> np.ndarray:
        return block_diag(*self.sigma)


def initial_state(config: FilterConfig) -> FilterState:
    sigma = diag_blocks(config.sigma0)
    return FilterState(GroupElement.identity(sigma.shape[0]), sigma, 0.0)


def origin_velocity(X_hat: GroupElement, v) -> np.ndarray:
    return sym.psi(sym.inverse(X_hat), v)


def state_error(X_hat: GroupElement, xi) -> np.ndarray:
    return sym.phi(sym.inverse(X_hat), xi)


def estimate(state: FilterState, origin) -> np.ndarray:
    return sym.phi(state.X, origin)


def _central_jacobian(fun, m: int, h: float = FD_STEP) -> np.ndarray:
    cols = []
    for j in range(m):
        step = np.zeros(m)
        step[j] = h
        cols.append((fun(step) - fun(-step)) / (2.0 * h))
    return np.column_stack(cols)


def error_drift(model: SystemModel, e, v_origin) -> np.ndarray:
    """dphi_e(Lambda(e, v0) - Lambda(origin, v0)), the innovation-free error vector field."""
    diff = model.lift(e, v_origin) - model.lift(model.origin, v_origin)
    return sym.apply_blocks(model.dphi_at_identity(e), diff)


def _chart_differential(model: SystemModel, e, tangent) -> np.ndarray:
    if model.chart is subtraction_chart:
        return np.asarray(tangent, dtype=float).ravel()
    h = 1e-7
    return (model.chart(e + h * tangent, model.origin) - model.chart(e - h * tangent, model.origin)) / (2.0 * h)


def fd_A(model: SystemModel, v_origin, h: float = FD_STEP) -> np.ndarray:
    """Central finite difference of the chart-coordinate error drift at eps = 0."""

    def drift(eps):
        e = model.chart_inverse(eps, model.origin)
        return _chart_differential(model, e, error_drift(model, e, v_origin))

    return _central_jacobian(drift, 2 * model.n, h)


def fd_C(model: SystemModel, X_hat: GroupElement, h: float = FD_STEP) -> np.ndarray:
    """Central finite difference of eps -> h(phi_Xhat(chart^{-1}(eps))) at eps = 0."""
    origin = model.origin

    def out(eps):
        return np.asarray(model.output(model.phi(X_hat, model.chart_inverse(eps, origin)))).ravel()

    return _central_jacobian(out, 2 * model.n, h)


def build_A(model: SystemModel, v_origin) -> np.ndarray:
    if model.analytic_A is not None:
        return block_diag(*model.analytic_A(model.origin, v_origin))
    return fd_A(model, v_origin)


def build_C(model: SystemModel, X_hat: GroupElement) -> np.ndarray:
    if model.analytic_C is not None:
        return block_diag(*model.analytic_C(model.origin, X_hat))
    return fd_C(model, X_hat)


def _A_blocks(model: SystemModel, v_origin) -> np.ndarray:
    if model.analytic_A is not None:
        return np.asarray(model.analytic_A(model.origin, v_origin))
    return diag_blocks(fd_A(model, v_origin))


def _C_blocks(model: SystemModel, X_hat: GroupElement) -> np.ndarray:
    if model.analytic_C is not None:
        return np.asarray(model.analytic_C(model.origin, X_hat))
    return diag_blocks(fd_C(model, X_hat))


def _T(M):
    return np.swapaxes(M, -1, -2)


def _assert_pd(sigma):
    eig_min = np.atleast_1d(np.linalg.eigvalsh(sigma).min(axis=-1))
    bad = np.flatnonzero(eig_min <= PD_FLOOR)
    if bad.size:
        where = f"block {int(bad[0])}" if sigma.ndim == 3 else "matrix"
        raise NumericalInstabilityError(
            f"Riccati {where} lost positive definiteness (min eigenvalue "
            f"{eig_min[bad[0]]:.3g}); reduce dt or revisit gains"
        )


def riccati_step(sigma, A, C, P, Q, dt: float) -> np.ndarray:
    """One explicit Euler step of the Riccati flow, then symmetrise.

    Works on dense matrices ``(m, m)`` or on stacks of blocks ``(n, k, k)``;
    all arguments must use the same layout.
    """
    sigma = np.asarray(sigma, dtype=float)
    A, C, P, Q = (np.asarray(M, dtype=float) for M in (A, C, P, Q))
    CtQinvC = _T(C) @ np.linalg.solve(Q, C)
    sigma_dot = A @ sigma + sigma @ _T(A) + P - sigma @ CtQinvC @ sigma
    out = sigma + dt * sigma_dot
    out = 0.5 * (out + _T(out))
    _assert_pd(out)
    return out


def riccati_measurement_update(sigma, C, Q, dt: float) -> np.ndarray:
    """Information-form absorption of the output term over one step.

    ``(Sigma^{-1} + dt C^T Q^{-1} C)^{-1}`` agrees with the Euler step of
    ``-Sigma C^T Q^{-1} C Sigma`` to first order in ``dt`` but stays positive
    definite for any step size.
    """
    sigma, C, Q = (np.asarray(M, dtype=float) for M in (sigma, C, Q))
    info = np.linalg.inv(sigma) + dt * _T(C) @ np.linalg.solve(Q, C)
    out = np.linalg.inv(info)
    return 0.5 * (out + _T(out))


def riccati_step_sampled(sigma, A, C, P, Q, dt: float) -> np.ndarray:
    """First-order step of the Riccati flow that cannot leave the PD cone.

    Absorbs the output term in information form, then propagates with
    ``F Sigma F^T + dt P`` where ``F = I + dt A``.
    """
    return riccati_propagate(riccati_measurement_update(sigma, C, Q, dt), A, P, dt)


def riccati_propagate(sigma, A, P, dt: float) -> np.ndarray:
    A, P = np.asarray(A, dtype=float), np.asarray(P, dtype=float)
    F = np.eye(A.shape[-1]) + dt * A
    out = F @ sigma @ _T(F) + dt * P
    out = 0.5 * (out + _T(out))
    _assert_pd(out)
    return out


def innovation(model: SystemModel, sigma, C, Q, y, y_hat) -> np.ndarray:
    """Algebra-valued correction Dphi^dagger . Sigma C^T Q^{-1} (y - y_hat).

    The subtraction chart has identity differential, so no chart factor
    appears. ``sigma``, ``C`` and ``Q`` may be dense or block stacks.
    """
    residual = (np.asarray(y, dtype=float) - np.asarray(y_hat, dtype=float)).reshape(-1, 2)
    sigma, C, Q = (np.asarray(M, dtype=float) for M in (sigma, C, Q))
    if sigma.ndim == 2:
        sigma, C, Q = (diag_blocks(M) for M in (sigma, C, Q))
    gain = sigma @ np.swapaxes(C, -1, -2) @ np.linalg.inv(Q)
    correction = np.einsum("nij,nj->ni", gain, residual)
    return sym.apply_blocks(model.dphi_right_inverse(model.origin), correction)


def observer_step(model: SystemModel, X_hat: GroupElement, v, delta, dt: float,
                  integrator: str = "euler") -> GroupElement:
    """Advance Xhat' = dL Lambda(phi(Xhat, origin), v) + dR Delta by ``dt``.

    ``"euler"`` steps theta and a additively; ``"lie_euler"`` uses the group
    exponential, so scales stay positive; ``"exact_hold"`` follows the exact
    lifted trajectory for the held input and then applies ``exp(dt Delta)``.
    """
    delta = np.asarray(delta, dtype=float).reshape(-1, 2)
    if integrator == "exact_hold":
        if model.flow is None:
            raise ValueError("exact_hold integration needs a model with a flow hook")
        x_hat = model.phi(X_hat, model.origin)
        step = GroupElement.transport(x_hat, model.flow(x_hat, v, dt))
        return X_hat @ step @ GroupElement.exp(dt * delta)
    u = model.lift(model.phi(X_hat, model.origin), v) + delta
    if integrator == "lie_euler":
        return X_hat @ GroupElement.exp(dt * u)
    scale = X_hat.scale * (1.0 + dt * u[:, 1])
    if not np.all(scale > 0.0):
        raise NumericalInstabilityError(f"scale became non-positive; dt={dt} is too large")
    return GroupElement(X_hat.theta + dt * u[:, 0], scale)


@dataclass(frozen=True)
class StepDiagnostics:
    v_origin: np.ndarray
    A: np.ndarray
    C: np.ndarray
    y_hat: np.ndarray
    delta: np.ndarray


def filter_update(model: SystemModel, config: FilterConfig, state: FilterState, v, y,
                  dt: Optional[float] = None, diagnostics: Optional[list] = None) -> FilterState:
    """Advance the filter by one step using measurement ``y`` at the current time.

    The innovation is computed from the pre-step observer state; ``Sigma``
    and ``Xhat`` then advance together. With ``config.riccati == "euler"``
    both the gain and the Riccati step are the literal explicit Euler forms;
    the default ``"sampled"`` scheme uses the output-absorbed Riccati value
    for the gain, which is the same flow to first order in ``dt``.
    """
    dt = config.dt if dt is None else dt
    v_origin = origin_velocity(state.X, v)
    A = _A_blocks(model, v_origin)
    C = _C_blocks(model, state.X)
    y_hat = np.asarray(model.output(model.phi(state.X, model.origin)))
    P, Q = config.P_blocks, config.Q_blocks
    if config.riccati == "euler":
        delta = innovation(model, state.sigma, C, Q, y, y_hat)
        sigma = riccati_step(state.sigma, A, C, P, Q, dt)
    else:
        # the gain Sigma_u C^T Q^{-1} equals Sigma C^T (Q + dt C Sigma C^T)^{-1}
        sigma_u = riccati_measurement_update(state.sigma, C, Q, dt)
        delta = innovation(model, sigma_u, C, Q, y, y_hat)
        sigma = riccati_propagate(sigma_u, A, P, dt)
    X = observer_step(model, state.X, v, delta, dt, integrator=config.integrator)
    if diagnostics is not None:
        diagnostics.append(StepDiagnostics(v_origin, A, C, y_hat, delta))
    return FilterState(X, sigma, state.t + dt)
