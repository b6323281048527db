"""Symmetry group (S^1 x R+)^n acting on planar landmark configurations.

Array conventions used throughout the package:

* a system state is an ``(n, 2)`` array of landmark coordinates,
* an extended velocity is an ``(n, 2)`` array, one velocity per landmark,
* a Lie algebra element is an ``(n, 2)`` array of ``(omega_i, alpha_i)``,
* a group element is a :class:`GroupElement` holding angles and scales.

Flattening any of these with ``ravel()`` gives the R^{2n} coordinates used by
the filter matrices, landmark-major.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

S = np.array([[0.0, -1.0], [1.0, 0.0]])
S.setflags(write=False)

MIN_LANDMARK_NORM = 1e-9


class DomainError(ValueError):
    """A landmark sits at (or numerically on) the excluded origin."""


class DimensionError(ValueError):
    """Operands disagree on the number of landmarks."""


def wrap_angle(theta):
    """Map angles to the canonical interval (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(theta, dtype=float), 2.0 * np.pi)


@dataclass(frozen=True)
class GroupElement:
    """Element ((theta_i, a_i))_i of the abelian group (S^1 x R+)^n."""

    theta: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        theta = wrap_angle(np.atleast_1d(np.asarray(self.theta, dtype=float)))
        scale = np.atleast_1d(np.asarray(self.scale, dtype=float)).copy()
        if theta.ndim != 1 or theta.shape != scale.shape:
            raise DimensionError(
                f"theta {theta.shape} and scale {scale.shape} must be matching 1-d arrays"
            )
        if not np.all(scale > 0.0):
            raise ValueError("scale components must be strictly positive")
        theta.setflags(write=False)
        scale.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "scale", scale)

    @property
    def n(self) -> int:
        return self.theta.shape[0]

    @classmethod
    def identity(cls, n: int) -> GroupElement:
        return cls(np.zeros(n), np.ones(n))

    @classmethod
    def exp(cls, u) -> GroupElement:
        """Group exponential of an algebra element ``(omega_i, alpha_i)``."""
        u = np.asarray(u, dtype=float).reshape(-1, 2)
        return cls(u[:, 0], np.exp(u[:, 1]))

    @classmethod
    def transport(cls, xi_from, xi_to) -> GroupElement:
        """Return X with ``phi(X, xi_from) == xi_to``; the action is transitive."""
        xi_from = as_state(xi_from)
        xi_to = as_state(xi_to)
        _same_n(xi_from, xi_to)
        theta = np.arctan2(xi_from[:, 1], xi_from[:, 0]) - np.arctan2(xi_to[:, 1], xi_to[:, 0])
        scale = np.linalg.norm(xi_from, axis=1) / np.linalg.norm(xi_to, axis=1)
        return cls(theta, scale)

    def __matmul__(self, other: GroupElement) -> GroupElement:
        return compose(self, other)

    def inverse(self) -> GroupElement:
        return inverse(self)

    def as_array(self) -> np.ndarray:
        """``(n, 2)`` array of ``(theta_i, a_i)`` rows."""
        return np.column_stack([self.theta, self.scale])


def _same_n(a, b):
    na = a.n if isinstance(a, GroupElement) else np.shape(a)[0]
    nb = b.n if isinstance(b, GroupElement) else np.shape(b)[0]
    if na != nb:
        raise DimensionError(f"landmark count mismatch: {na} != {nb}")


def as_state(xi, check_origin: bool = True) -> np.ndarray:
    """Coerce to an ``(n, 2)`` float array, rejecting landmarks at the origin."""
    xi = np.asarray(xi, dtype=float).reshape(-1, 2)
    if check_origin:
        norms = np.linalg.norm(xi, axis=1)
        bad = np.flatnonzero(~(norms >= MIN_LANDMARK_NORM))
        if bad.size:
            raise DomainError(f"landmark {int(bad[0])} has norm {norms[bad[0]]:.3g} (< {MIN_LANDMARK_NORM})")
    return xi


def _as_pairs(v) -> np.ndarray:
    return np.asarray(v, dtype=float).reshape(-1, 2)


def compose(A: GroupElement, B: GroupElement) -> GroupElement:
    _same_n(A, B)
    return GroupElement(A.theta + B.theta, A.scale * B.scale)


def inverse(A: GroupElement) -> GroupElement:
    return GroupElement(-A.theta, 1.0 / A.scale)


def adjoint(X: GroupElement, u) -> np.ndarray:
    # The group is abelian, so Ad_X is the identity map.
    u = _as_pairs(u)
    _same_n(X, u)
    return u.copy()


def rotation_matrix(theta) -> np.ndarray:
    """R(theta) = exp(theta S); batched over a leading axis if ``theta`` is an array."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([np.stack([c, -s], axis=-1), np.stack([s, c], axis=-1)], axis=-2)


def _rotate_back(theta, vecs):
    # R(theta)^T v, row-wise
    c, s = np.cos(theta), np.sin(theta)
    return np.column_stack([c * vecs[:, 0] + s * vecs[:, 1], -s * vecs[:, 0] + c * vecs[:, 1]])


def phi(X: GroupElement, xi) -> np.ndarray:
    """State action x_i -> a_i^{-1} R(theta_i)^T x_i."""
    xi = as_state(xi)
    _same_n(X, xi)
    return _rotate_back(X.theta, xi) / X.scale[:, None]


def psi(X: GroupElement, v) -> np.ndarray:
    """Input action on the extended velocity, same form as ``phi``."""
    v = _as_pairs(v)
    _same_n(X, v)
    return _rotate_back(X.theta, v) / X.scale[:, None]


def lift(xi, v) -> np.ndarray:
    """Equivariant lift of the extended kinematics x_i' = -v_i.

    Returns ``(omega_i, alpha_i) = (-x^T S v, x^T v) / |x|^2``, which satisfies
    ``dphi_at_identity(xi) @ lift(xi, v) == -v`` landmark by landmark.
    """
    xi = as_state(xi)
    v = _as_pairs(v)
    _same_n(xi, v)
    sq = np.einsum("ij,ij->i", xi, xi)
    x_S_v = np.einsum("ij,jk,ik->i", xi, S, v)
    x_v = np.einsum("ij,ij->i", xi, v)
    return np.column_stack([-x_S_v / sq, x_v / sq])


def dphi_at_identity(xi) -> np.ndarray:
    """Per-landmark 2x2 maps (omega, alpha) -> -omega S x - alpha x, shape ``(n, 2, 2)``."""
    xi = as_state(xi)
    Sx = xi @ S.T
    return np.stack([-Sx, -xi], axis=-1)


def dphi_right_inverse(xi) -> np.ndarray:
    """Inverse of :func:`dphi_at_identity`: rows ``(x^T S, -x^T) / |x|^2``."""
    xi = as_state(xi)
    sq = np.einsum("ij,ij->i", xi, xi)
    xS = xi @ S
    return np.stack([xS, -xi], axis=-2) / sq[:, None, None]


def apply_blocks(blocks: np.ndarray, u) -> np.ndarray:
    """Apply ``(n, 2, 2)`` blocks to ``(n, 2)`` rows."""
    return np.einsum("nij,nj->ni", blocks, _as_pairs(u))
