import itertools
import math

import numpy as np
import pytest

from drfeas import AffineSubspace, Ball, Box, HalfSpace, ParabolaHypograph, Slab, Sphere
from drfeas.affine_reduction import affine_hull_union
from drfeas.intersections import FinitePoints, Polyhedron, intersection_oracle
from drfeas.regularity import (RateVariant, ThetaSource, Unsupported, cq_number_closed_form, cq_number_sampled,
                               diagnose, gamma_constant, kappa_bound, linear_regularity_modulus,
                               prescribe_radius, quasi_fne_check, superregularity_probe)

SQ3 = math.sqrt(3.0)
W_CIRC = np.array([0.5, SQ3 / 2])
CIRCLES = (Sphere([0, 0], 1), Sphere([1, 0], 1))
CIRCLE_ORACLE = FinitePoints([W_CIRC, [0.5, -SQ3 / 2]])
STRIPS = (Slab([0, 1], 0, 1), Slab(np.array([-1, 1]) / math.sqrt(2), 0, 1 / math.sqrt(2)))
E3 = np.eye(3)
X3 = AffineSubspace([0, 0, 0], [E3[0]])
Y3 = AffineSubspace([0, 0, 0], [E3[1]])
X2 = AffineSubspace([0, 0], [[1, 0]])
Y2 = AffineSubspace([0, 0], [[0, 1]])
STRIPS_MU = 2 / math.sqrt(2 - math.sqrt(2))


# --- CQ-number -----------------------------------------------------------------

def test_closed_form_circles():
    # normal lines span{w} and span{w - (1,0)}: |<w, w - e1>| = 1/2
    assert cq_number_closed_form(*CIRCLES, W_CIRC) == pytest.approx(0.5, abs=1e-15)


def test_closed_form_lines_r3():
    assert cq_number_closed_form(X3, Y3, [0, 0, 0]) == 1.0
    L = affine_hull_union(X3, Y3).L
    assert cq_number_closed_form(X3, Y3, [0, 0, 0], restricted_to=L) == 0.0


def test_closed_form_friedrichs_angle():
    for ang in (0.1, 0.7, 1.2):
        line = AffineSubspace([0, 0], [[math.cos(ang), math.sin(ang)]])
        assert cq_number_closed_form(X2, line, [0, 0]) == pytest.approx(abs(math.cos(ang)), abs=1e-12)
    # planes in R^3 meeting along a line: normals at the dihedral angle
    P1 = AffineSubspace([0, 0, 0], [E3[0], E3[1]])
    P2 = AffineSubspace([0, 0, 0], [E3[0], [0, math.cos(0.4), math.sin(0.4)]])
    assert cq_number_closed_form(P1, P2, [0, 0, 0]) == pytest.approx(math.cos(0.4), abs=1e-12)


def test_closed_form_halfspaces_and_slabs():
    assert cq_number_closed_form(HalfSpace([0, 1], 0), HalfSpace([0, -1], 0), [0, 0]) == pytest.approx(1.0)
    assert cq_number_closed_form(HalfSpace([0, 1], 0), HalfSpace([0, 1], 0), [0, 0]) == 0.0
    # strip corners at the origin: outward rays (0,-1) and (1,-1)/sqrt2
    assert cq_number_closed_form(*STRIPS, [0, 0]) == 0.0
    # interior point: zero cones
    assert cq_number_closed_form(*STRIPS, [0.2, 0.5]) == 0.0


def test_closed_form_unsupported_pair():
    with pytest.raises(Unsupported):
        cq_number_closed_form(Box([0, 0], [1, 1]), Box([1, 1], [2, 2]), [1, 1])


def test_sampled_opposing_halfspaces():
    assert cq_number_sampled(HalfSpace([0, 1], 0), HalfSpace([0, -1], 0), [0, 0], 0.1, 500, 0) == pytest.approx(1.0)


def test_sampled_identical_sets():
    # a line paired with itself: u = -v is available, so the constant is 1
    assert cq_number_sampled(X2, X2, [0, 0], 0.1, 200, 0) == pytest.approx(1.0)
    # a half-space with itself: its normal ray never meets its negative
    assert cq_number_sampled(HalfSpace([0, 1], 0), HalfSpace([0, 1], 0), [0, 0], 0.1, 200, 0) == 0.0


def test_sampled_restricted_lines_r3():
    L = affine_hull_union(X3, Y3).L
    assert cq_number_sampled(X3, Y3, [0, 0, 0], 0.1, 2000, 0) > 0.999
    assert cq_number_sampled(X3, Y3, [0, 0, 0], 0.1, 2000, 0, restricted_to=L) <= 1e-12


@pytest.mark.parametrize("pair,w,delta,closed", [
    (CIRCLES, W_CIRC, 0.005, 0.5),
    ((X2, AffineSubspace([0, 0], [[1, 1]])), np.zeros(2), 0.1, math.sqrt(0.5)),
])
def test_sampled_theta_approaches_closed_form(pair, w, delta, closed):
    medians = []
    for count in (100, 1000, 10_000):
        medians.append(np.median([cq_number_sampled(*pair, w, delta, count, s) for s in range(5)]))
    assert all(b >= a - 1e-12 for a, b in zip(medians, medians[1:]))
    assert medians[-1] <= closed + 0.05
    assert abs(medians[-1] - closed) <= 0.05


def test_sampled_theta_shrinks_with_delta():
    # the neighbourhood constant overestimates the pointwise value and decreases with delta
    vals = [cq_number_sampled(*CIRCLES, W_CIRC, d, 2000, 0) for d in (0.1, 0.03, 0.01)]
    assert vals[0] > vals[1] > vals[2] > 0.5


# --- linear regularity ---------------------------------------------------------

def test_mu_strips_large_delta():
    mu = linear_regularity_modulus(*STRIPS, [0, 0], 2.5, 5000, 0, Polyhedron.from_sets(*STRIPS))
    assert mu <= STRIPS_MU + 1e-9
    assert mu == pytest.approx(STRIPS_MU, abs=0.01)


def test_mu_identical_sets_is_one():
    S = STRIPS[0]
    assert linear_regularity_modulus(S, S, [0, 0.5], 1.0, 1000, 0, intersection_oracle(S, S)) == 1.0


def test_mu_orthogonal_lines_against_grid():
    # grid oracle for sup ||x|| / max(|x1|, |x2|) over the 2-ball
    ax = np.linspace(-2, 2, 801)
    g = np.stack(np.meshgrid(ax, ax), -1).reshape(-1, 2)
    g = g[(np.linalg.norm(g, axis=1) <= 2) & (np.abs(g).max(axis=1) > 1e-12)]
    grid_mu = np.max(np.linalg.norm(g, axis=1) / np.abs(g).max(axis=1))
    mu = linear_regularity_modulus(X2, Y2, [0, 0], 1.0, 5000, 0, intersection_oracle(X2, Y2))
    assert mu <= grid_mu + 1e-9
    assert mu == pytest.approx(grid_mu, abs=2e-3)


def test_mu_stable_under_doubling_count():
    pairs = [(STRIPS, [0, 0]), ((Ball([0, 0], 1), Ball([1, 0], 1)), [0.5, 0.0]),
             ((HalfSpace([0, 1], 0), Box([-1, -1], [1, 1])), [0, 0])]
    for (A, B), w in pairs:
        oracle = intersection_oracle(A, B)
        m1 = linear_regularity_modulus(A, B, w, 0.2, 1000, 0, oracle)
        m2 = linear_regularity_modulus(A, B, w, 0.2, 2000, 0, oracle)
        assert abs(m2 - m1) <= 0.1 * m1


# --- superregularity -------------------------------------------------------------

@pytest.mark.parametrize("S,w", [
    (STRIPS[0], [0, 0]), (STRIPS[1], [0, 0]), (Box([0, 0], [1, 1]), [1, 1]),
    (ParabolaHypograph(1.0), [0, 0]), (Ball([0, 0], 1), [1, 0]), (X2, [0, 0]),
])
def test_convex_sets_have_zero_eps(S, w):
    assert superregularity_probe(S, w, 0.3, 1000, 0) <= 1e-9


def test_circle_eps_is_linear_in_delta():
    S, w = CIRCLES[0], [1.0, 0.0]
    eps = {d: superregularity_probe(S, w, d, 4000, 0) for d in (0.5, 0.1, 0.05)}
    assert eps[0.05] < eps[0.1] < eps[0.5]
    # chords inside the delta-ball reach length 2 delta, giving eps about delta / r
    for d, e in eps.items():
        assert 0.8 * d <= e <= 1.05 * d


def test_superregularity_requires_member():
    with pytest.raises(ValueError):
        superregularity_probe(CIRCLES[0], [0, 0], 0.1, 10, 0)


# --- rate bounds ----------------------------------------------------------------

def test_kappa_bound_strips_exact():
    b = kappa_bound(0, 0, math.sqrt(2) / 2, STRIPS_MU, RateVariant.GENERAL)
    assert b.kappa_sq == pytest.approx((17 + 2 * math.sqrt(2)) / 20, abs=1e-12)
    assert b.feasible and b.kappa == pytest.approx(0.99570, abs=1e-5)


def test_kappa_bound_trivial_cases():
    b = kappa_bound(0, 0, 0, 1, RateVariant.AFFINE_A)
    assert b.kappa_sq == 0.0 and b.kappa == 0.0 and b.feasible
    b = kappa_bound(0, 0, 0, 1, RateVariant.GENERAL)
    assert b.kappa_sq == pytest.approx(0.8) and b.kappa == pytest.approx(math.sqrt(0.8))
    b = kappa_bound(0.5, 0.5, 0.5, 2)
    assert not b.feasible and b.kappa is None
    with pytest.raises(ValueError):
        kappa_bound(-0.1, 0, 0, 1)
    with pytest.raises(ValueError):
        kappa_bound(0, 0, 0, 0.5)


def test_kappa_bound_monotone_on_grid():
    eps = [0.0, 0.01, 0.1]
    thetas = [0.0, 0.3, 0.9]
    mus = [1.0, 2.0, 5.0]
    for variant in RateVariant:
        grid = {}
        for e1, e2, t, m in itertools.product(eps, eps, thetas, mus):
            grid[e1, e2, t, m] = kappa_bound(e1, e2, t, m, variant).kappa_sq
        for (e1, e2, t, m), v in grid.items():
            for axis, values in enumerate((eps, eps, thetas, mus)):
                key = [e1, e2, t, m]
                i = values.index(key[axis])
                if i + 1 < len(values):
                    key[axis] = values[i + 1]
                    assert grid[tuple(key)] >= v - 1e-15


def test_gamma_constant():
    assert gamma_constant(0, 0) == 1.0
    assert gamma_constant(0.5, 0) == pytest.approx(2.5)


def test_prescribe_radius():
    assert prescribe_radius(1, 0) == 0.5
    assert prescribe_radius(1, 0.99570) == pytest.approx(0.00215, abs=1e-9)
    assert prescribe_radius(2, 0.5) == 0.5
    with pytest.raises(ValueError):
        prescribe_radius(1, 1.0)


# --- quasi firm nonexpansiveness --------------------------------------------------

def test_quasi_fne_strips():
    c = quasi_fne_check(*STRIPS, [0, 0], 0.5, 0, 0, 1000, 0, Polyhedron.from_sets(*STRIPS))
    assert c.gamma_hat <= 1 + 1e-9 and c.holds


def test_quasi_fne_circles():
    delta = 0.1
    eA = superregularity_probe(CIRCLES[0], W_CIRC, 2 * delta, 2000, 1)
    eB = superregularity_probe(CIRCLES[1], W_CIRC, 3 * delta, 2000, 2)
    c = quasi_fne_check(*CIRCLES, W_CIRC, delta, eA, eB, 2000, 3, CIRCLE_ORACLE)
    assert c.holds and c.gamma_hat <= gamma_constant(eA, eB) + 1e-6
    assert c.samples == 2000


# --- full diagnosis ----------------------------------------------------------------

def test_diagnose_lines_r3_classification():
    L = affine_hull_union(X3, Y3).L
    d = diagnose(X3, Y3, [0, 0, 0], L, intersection_oracle(X3, Y3), count=500)
    assert d.theta_bar == 1.0 and d.restricted_theta == 0.0
    assert d.theta_source is ThetaSource.CLOSED_FORM
    assert not d.strongly_regular and d.affine_hull_regular
    assert d.kappa_affineA.feasible
    keys = {"theta_bar", "theta_source", "restricted_theta", "mu", "eps_A", "eps_B", "delta", "gamma_hat",
            "kappa_general", "kappa_affineA", "prescribed_radius"}
    assert set(d.to_dict()) == keys


def test_diagnose_classification_matches_theta():
    cases = [(CIRCLES, W_CIRC, CIRCLE_ORACLE), (STRIPS, np.zeros(2), Polyhedron.from_sets(*STRIPS)),
             ((HalfSpace([0, -1], 0), ParabolaHypograph(1.0)), np.zeros(2), FinitePoints([[0, 0]]))]
    for (A, B), w, oracle in cases:
        L = affine_hull_union(A, B).L
        d = diagnose(A, B, w, L, oracle, count=300)
        assert d.strongly_regular == (d.theta_bar < 1)
        assert d.affine_hull_regular == (d.restricted_theta < 1)
        assert d.mu >= 1 and d.eps_A >= 0 and d.eps_B >= 0


def test_diagnose_falls_back_to_sampling():
    A, B = Box([0, 0], [1, 1]), Box([1, 1], [2, 2])
    d = diagnose(A, B, [1, 1], affine_hull_union(A, B).L, intersection_oracle(A, B), count=300)
    assert d.theta_source is ThetaSource.SAMPLED
    # the boxes touch at a corner: outward normal cones (1,1)-quadrant and (-1,-1)-quadrant oppose
    assert d.theta_bar == pytest.approx(1.0, abs=1e-6)
