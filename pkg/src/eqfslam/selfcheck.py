"""Quick numerical audit of the symmetry and linearisation identities."""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from eqfslam import engine as eqf
from eqfslam import slam2d
from eqfslam import symmetry as sym
from eqfslam.symmetry import S, GroupElement


class CheckResult(NamedTuple):
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tolerance)


def _group(rng, n):
    return GroupElement(rng.uniform(-np.pi, np.pi, n), np.exp(rng.uniform(-1.0, 1.0, n)))


def _state(rng, n, lo=0.5, hi=3.0):
    ang = rng.uniform(-np.pi, np.pi, n)
    r = rng.uniform(lo, hi, n)
    return np.column_stack([r * np.cos(ang), r * np.sin(ang)])


def _rel(a, b):
    return np.abs(a - b).max() / max(np.abs(b).max(), 1e-12)


def _checks(rng, draws, n) -> dict[str, tuple[Callable[[], float], float]]:
    def group_axioms():
        worst = 0.0
        for _ in range(draws):
            A, B, C = _group(rng, n), _group(rng, n), _group(rng, n)
            lhs, rhs = (A @ B) @ C, A @ (B @ C)
            ident = A @ A.inverse()
            worst = max(worst,
                        np.abs(sym.wrap_angle(lhs.theta - rhs.theta)).max(),
                        np.abs(lhs.scale - rhs.scale).max(),
                        np.abs(sym.wrap_angle(ident.theta)).max(),
                        np.abs(ident.scale - 1.0).max())
        return worst

    def action_axioms():
        worst = 0.0
        for _ in range(draws):
            X, Y, xi, v = _group(rng, n), _group(rng, n), _state(rng, n), rng.normal(size=(n, 2))
            worst = max(worst,
                        np.abs(sym.phi(Y, sym.phi(X, xi)) - sym.phi(X @ Y, xi)).max(),
                        np.abs(sym.psi(Y, sym.psi(X, v)) - sym.psi(X @ Y, v)).max())
        return worst

    def lift_condition():
        worst = 0.0
        for _ in range(draws):
            xi, v = _state(rng, n), rng.normal(size=(n, 2))
            got = sym.apply_blocks(sym.dphi_at_identity(xi), sym.lift(xi, v))
            worst = max(worst, np.abs(got - slam2d.dynamics(xi, v)).max())
        return worst

    def lift_equivariance():
        worst = 0.0
        for _ in range(draws):
            X, xi, v = _group(rng, n), _state(rng, n), rng.normal(size=(n, 2))
            lhs = sym.adjoint(X, sym.lift(sym.phi(X, xi), sym.psi(X, v)))
            worst = max(worst, np.abs(lhs - sym.lift(xi, v)).max())
        return worst

    def projector_identity():
        worst = 0.0
        for _ in range(draws):
            x = rng.normal(size=2)
            sx = S.T @ x
            worst = max(worst, np.abs(np.outer(sx, sx) / (x @ x) - (np.eye(2) - np.outer(x, x) / (x @ x))).max())
        return worst

    def dphi_inverse():
        worst = 0.0
        for _ in range(draws):
            xi = _state(rng, n)
            prod = sym.dphi_at_identity(xi) @ sym.dphi_right_inverse(xi)
            worst = max(worst, np.abs(prod - np.eye(2)).max())
        return worst

    def jacobian_A():
        worst = 0.0
        for _ in range(20):
            model = slam2d.slam2d_model(_state(rng, n))
            v0 = rng.uniform(-3, 3, (n, 2))
            worst = max(worst, _rel(eqf.build_A(model, v0), eqf.fd_A(model, v0)))
        return worst

    def jacobian_C():
        worst = 0.0
        for _ in range(20):
            model = slam2d.slam2d_model(_state(rng, n))
            X = _group(rng, n)
            worst = max(worst, _rel(eqf.build_C(model, X), eqf.fd_C(model, X)))
        return worst

    return {
        "group axioms": (group_axioms, 1e-14),
        "right-action axioms (phi, psi)": (action_axioms, 1e-12),
        "lift condition": (lift_condition, 1e-12),
        "lift equivariance": (lift_equivariance, 1e-12),
        "projector identity": (projector_identity, 1e-12),
        "dphi . dphi^-1 = I": (dphi_inverse, 1e-12),
        "A blocks vs finite differences": (jacobian_A, 1e-5),
        "C blocks vs finite differences": (jacobian_C, 1e-5),
    }


def run_selfcheck(seed: int = 0, draws: int = 200, n: int = 3) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    return [CheckResult(name, float(fn()), tol) for name, (fn, tol) in _checks(rng, draws, n).items()]
