"""
Linearised error system against finite differences
===================================================

The filter gain comes from the 2x2 blocks of the error drift A and the
bearing output C. Both have closed forms; here they are compared with
central differences of the nonlinear maps.
"""

import numpy as np

from eqfslam import GroupElement, engine, slam2d

rng = np.random.default_rng(1)
origin = np.array([[0.4, 1.8], [-1.2, 0.9]])
model = slam2d.slam2d_model(origin)

v0 = rng.normal(size=(2, 2))
A = engine.build_A(model, v0)
print(np.round(A, 4))
print("A max gap:", np.abs(A - engine.fd_A(model, v0)).max())

X = GroupElement([0.3, -2.0], [1.5, 0.7])
C = engine.build_C(model, X)
print("C max gap:", np.abs(C - engine.fd_C(model, X)).max())

###############################################################################
# A bearing cannot see range: each C block kills the radial direction

print(C @ origin.ravel())
