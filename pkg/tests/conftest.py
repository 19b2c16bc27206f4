import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from drfeas import AffineSubspace, Ball, Box, HalfSpace, ParabolaHypograph, Slab, Sphere

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

coord = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


def vec(d):
    return st.lists(coord, min_size=d, max_size=d).map(np.array)


def random_convex_set(rng, d=2):
    """One random convex variant in R^d."""
    kind = rng.integers(5)
    if kind == 0:
        k = rng.integers(0, d + 1)
        return AffineSubspace(rng.normal(size=d), rng.normal(size=(k, d)) if k else None)
    if kind == 1:
        n = rng.normal(size=d)
        return HalfSpace(n / np.linalg.norm(n), rng.normal())
    if kind == 2:
        n = rng.normal(size=d)
        lo = rng.normal()
        return Slab(n / np.linalg.norm(n), lo, lo + rng.uniform(0, 2))
    if kind == 3:
        return Ball(rng.normal(size=d), rng.uniform(0.2, 2))
    lo = rng.normal(size=d)
    return Box(lo, lo + rng.uniform(0, 2, size=d))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def planar_sets():
    """One instance of every variant in R^2, used by the grid-oracle checks."""
    return {
        "affine": AffineSubspace([0.0, 1.0], [[1.0, 1.0]]),
        "halfspace": HalfSpace([0.6, 0.8], 0.5),
        "slab": Slab([0.0, 1.0], -0.5, 1.0),
        "ball": Ball([0.5, -0.5], 1.5),
        "sphere": Sphere([0.5, -0.5], 1.5),
        "box": Box([-1.0, -2.0], [1.0, 0.5]),
        "parabola": ParabolaHypograph(1.0),
    }


def random_convex_set_through(rng, w, d=None):
    """Random convex variant guaranteed to contain ``w``."""
    w = np.asarray(w, dtype=float)
    d = len(w)
    kind = rng.integers(5)
    n = rng.normal(size=d)
    n /= np.linalg.norm(n)
    if kind == 0:
        k = rng.integers(0, d + 1)
        return AffineSubspace(w, rng.normal(size=(k, d)) if k else None)
    if kind == 1:
        return HalfSpace(n, n @ w + rng.uniform(0, 1))
    if kind == 2:
        c = n @ w
        return Slab(n, c - rng.uniform(0, 1), c + rng.uniform(0, 1))
    if kind == 3:
        r = rng.uniform(0.2, 2)
        return Ball(w + rng.uniform(0, r) * n, r)
    return Box(w - rng.uniform(0, 1, size=d), w + rng.uniform(0, 1, size=d))
