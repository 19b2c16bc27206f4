import numpy as np
import pytest
from hypothesis import given

from drfeas import AffineSubspace, Ball, HalfSpace, ParabolaHypograph, Sphere, Transformed, run
from drfeas.affine_reduction import (AffineReductionError, affine_hull_union, reduce_trajectory,
                                     reduced_run_deviation, shadow_limit_formula)
from drfeas.harness import get_scenario

from conftest import vec

E3 = np.eye(3)
X3 = AffineSubspace([0, 0, 0], [E3[0]])
Y3 = AffineSubspace([0, 0, 0], [E3[1]])


def _basis_complete(pair):
    Q = np.vstack([pair.L.directions, pair.offset_basis])
    np.testing.assert_allclose(Q @ Q.T, np.eye(pair.L.dim), atol=1e-10)


def test_lines_in_r3_span_xy_plane():
    pair = affine_hull_union(X3, Y3)
    assert pair.dim == 2
    np.testing.assert_allclose(pair.L.projector, np.diag([1, 1, 0]), atol=1e-12)
    np.testing.assert_allclose(np.abs(pair.offset_basis), [[0, 0, 1]], atol=1e-12)
    _basis_complete(pair)


def test_ball_ball_is_full_space():
    pair = affine_hull_union(Ball([0, 0], 1), Ball([0, 0], 1))
    assert pair.is_full and pair.offset_basis.shape == (0, 2)


def test_parallel_lines_span_plane_y0():
    A = AffineSubspace([0, 0, 0], [E3[0]])
    B = AffineSubspace([0, 0, 1], [E3[0]])
    pair = affine_hull_union(A, B)
    assert pair.dim == 2
    _basis_complete(pair)
    # both lines sit inside L; the y-direction is the offset
    for t in np.linspace(-3, 3, 7):
        for p in ([t, 0, 0], [t, 0, 1]):
            np.testing.assert_allclose(pair.L.project(p).selected, p, atol=1e-12)
    np.testing.assert_allclose(np.abs(pair.offset_basis), [[0, 1, 0]], atol=1e-12)


def test_sets_lie_in_hull_by_sampling(rng):
    A = Transformed(Sphere([0, 0, 0], 1.0), None, [0, 0, 0])
    cases = [(X3, Y3), (Ball([0, 0], 1), ParabolaHypograph(1.0)), (A, X3)]
    for S1, S2 in cases:
        L = affine_hull_union(S1, S2).L
        for S in (S1, S2):
            pts = [S.project(x).selected for x in rng.normal(size=(200, S.dim)) * 3]
            assert max(L.distance(p) for p in pts) <= 1e-9


def test_reduce_x0_in_L_is_identity():
    L = affine_hull_union(X3, Y3).L
    t = run(X3, Y3, [1, 1, 0], 100, 1e-12)
    red = reduce_trajectory(t, L, X3, Y3)
    np.testing.assert_allclose(red.y, t.iterates, atol=1e-15)
    assert red.max_offset_deviation == 0.0


def test_reduce_lines_offset_is_e3():
    L = affine_hull_union(X3, Y3).L
    t = run(X3, Y3, [1, 1, 1], 100, 1e-12)
    red = reduce_trajectory(t, L, X3, Y3)
    np.testing.assert_allclose(red.offset, [0, 0, 1], atol=1e-15)
    assert red.max_offset_deviation <= 1e-12
    assert red.steps_ok
    assert red.report() == {"L_dim": 2, "offset_norm": 1.0, "max_offset_deviation": red.max_offset_deviation,
                            "theorem33_ok": True}


def test_reduce_full_hull_is_identity():
    sc = get_scenario("two-strips")
    L = affine_hull_union(sc.A, sc.B).L
    t = run(sc.A, sc.B, sc.x0, 1000, 1e-12)
    red = reduce_trajectory(t, L, sc.A, sc.B)
    np.testing.assert_allclose(red.y, t.iterates, atol=1e-12)


def test_offset_drift_is_an_internal_error():
    t = run(X3, Y3, [1, 1, 1], 100, 1e-12)
    wrong = AffineSubspace([0, 0, 0], [E3[0], E3[2]])  # not aff(A u B)
    with pytest.raises(AffineReductionError):
        reduce_trajectory(t, wrong)


@given(x=vec(3))
def test_commutation_with_reflection(x):
    # sets placed inside the plane x3 = 0.5
    L = AffineSubspace([0, 0, 0.5], [E3[0], E3[1]])
    inside = [AffineSubspace([1, 0, 0.5], [[1, 1, 0]]), AffineSubspace([0, 2, 0.5], None)]
    for S in inside:
        lhs = L.project(S.reflect(x).selected).selected
        rhs = S.reflect(L.project(x).selected).selected
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_commutation_with_embedded_circle(rng):
    # unit circle in the plane x3 = 0.5; projector is radial inside that plane
    L = AffineSubspace([0, 0, 0.5], [E3[0], E3[1]])
    c = np.array([0, 0, 0.5])

    def circle_reflect(p):
        v = p - c
        v[2] = 0
        foot = c + v / np.linalg.norm(v)
        return 2 * foot - p

    for x in rng.normal(size=(100, 3)) * 2:
        lhs = L.project(circle_reflect(x)).selected
        rhs = circle_reflect(L.project(x).selected)
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_rate_transfer_lines(rng):
    L = affine_hull_union(X3, Y3).L
    for x0 in rng.normal(size=(10, 3)) * 3:
        t = run(X3, Y3, x0, 1000, 1e-12)
        red = reduce_trajectory(t, L, X3, Y3)
        ybar = L.project(t.limit_estimate).selected
        e_x = np.linalg.norm(t.iterates - t.limit_estimate, axis=1)
        e_y = np.linalg.norm(red.y - ybar, axis=1)
        np.testing.assert_allclose(e_x, e_y, atol=1e-9)
        assert reduced_run_deviation(t, L, X3, Y3) <= 1e-9


def test_shadow_formula_lines():
    L = affine_hull_union(X3, Y3).L
    t = run(X3, Y3, [1, 1, 1], 100, 1e-12)
    sh = shadow_limit_formula(t, L, X3, Y3)
    np.testing.assert_allclose(sh.pA, 0, atol=1e-12)
    np.testing.assert_allclose(sh.pB, 0, atol=1e-12)
    np.testing.assert_allclose(sh.formula_value, sh.xbar - [0, 0, 1], atol=1e-15)
    assert sh.agree and sh.in_intersection


def test_shadow_formula_parabola_disagrees():
    A, B = HalfSpace([0, -1], 0), ParabolaHypograph(1.0)
    L = affine_hull_union(A, B).L
    t = run(A, B, [0, -1], 10, 1e-12)
    sh = shadow_limit_formula(t, L, A, B)
    np.testing.assert_allclose(sh.pA, [0, 0], atol=1e-15)
    np.testing.assert_allclose(sh.pB, [0, -1], atol=1e-15)
    assert not sh.agree


def test_shadow_formula_strips_agree(rng):
    sc = get_scenario("two-strips")
    L = affine_hull_union(sc.A, sc.B).L
    for x0 in rng.uniform(-10, 10, size=(10, 2)):
        t = run(sc.A, sc.B, x0, 10_000, 1e-12)
        sh = shadow_limit_formula(t, L, sc.A, sc.B)
        assert sh.agree and sh.in_intersection


def test_shadow_formula_requires_convergence():
    t = run(Sphere([0, 0], 1), Sphere([1, 0], 1), [0.6, 0.9], 2, 1e-15)
    with pytest.raises(ValueError):
        shadow_limit_formula(t, AffineSubspace.full(2), Sphere([0, 0], 1), Sphere([1, 0], 1))
