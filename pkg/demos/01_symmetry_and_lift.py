"""
Rotations and scalings of landmark bearings
===========================================

Each landmark gets its own rotation angle and scale. The group acts by
x -> a^{-1} R(theta)^T x and the lift turns a velocity into the algebra
element that reproduces it.
"""

import numpy as np

from eqfslam import GroupElement, dphi_at_identity, lift, phi, psi
from eqfslam.symmetry import apply_blocks

rng = np.random.default_rng(0)
xi = np.array([[1.0, 0.0], [0.3, 1.4], [-0.8, 1.1]])
X = GroupElement(rng.uniform(-np.pi, np.pi, 3), np.exp(rng.normal(size=3)))

###############################################################################
# Acting twice is acting once with the product

Y = GroupElement([0.2, -0.4, 1.0], [0.5, 2.0, 1.0])
print(np.abs(phi(Y, phi(X, xi)) - phi(X @ Y, xi)).max())

###############################################################################
# Any configuration can be moved to any other

target = np.array([[0.0, 2.0], [1.0, 1.0], [-1.0, -1.0]])
print(phi(GroupElement.transport(xi, target), xi))

###############################################################################
# The lift reproduces the landmark velocity -v

v = np.tile([2.0, 0.0], (3, 1))
u = lift(xi, v)
print(u)
print(apply_blocks(dphi_at_identity(xi), u))

# and it commutes with the group (the group is abelian, so Ad is trivial)
print(np.abs(lift(phi(X, xi), psi(X, v)) - u).max())
