import numpy as np
import pytest
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from eqfslam.symmetry import GroupElement


def polar_points(n, r_min=0.5, r_max=3.0):
    radius = st.floats(r_min, r_max)
    angle = st.floats(-np.pi, np.pi)
    pts = st.lists(st.tuples(radius, angle), min_size=n, max_size=n)
    return pts.map(lambda rs: np.array([[r * np.cos(a), r * np.sin(a)] for r, a in rs]))


def group_elements(n):
    theta = arrays(float, n, elements=st.floats(-np.pi, np.pi))
    log_scale = arrays(float, n, elements=st.floats(-1.5, 1.5))
    return st.builds(lambda t, s: GroupElement(t, np.exp(s)), theta, log_scale)


def velocities(n, bound=3.0):
    return arrays(float, (n, 2), elements=st.floats(-bound, bound))


@pytest.fixture
def rng():
    return np.random.default_rng(20201)


def random_group(rng, n):
    return GroupElement(rng.uniform(-np.pi, np.pi, n), np.exp(rng.uniform(-1.0, 1.0, n)))


def random_state(rng, n, lo=0.5, hi=3.0):
    ang = rng.uniform(-np.pi, np.pi, n)
    r = rng.uniform(lo, hi, n)
    return np.column_stack([r * np.cos(ang), r * np.sin(ang)])
