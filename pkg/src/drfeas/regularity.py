"""Regularity quantities behind the local R-linear rate of DR.

Closed forms are available for the CQ-number of the built-in set pairs.
Everything else (the CQ-number of arbitrary pairs, the linear-regularity
modulus, superregularity moduli, the quasi firm nonexpansiveness constant) is
estimated by sampling.  Sampled values are empirical, not certified: they are
maxima over finitely many probes of quantities defined as suprema.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dr_core import dr_step
from .sets import AffineSubspace, ClosedSet, NormalCone, as_vector, proximal_normal_sample, sample_ball

MEMBER_TOL = 1e-9
THETA_MARGIN = 0.02
_CHUNK = 2048


class Unsupported(Exception):
    """No closed form for this pair of sets; fall back to sampling."""


class ThetaSource(enum.Enum):
    CLOSED_FORM = "ClosedForm"
    SAMPLED = "Sampled"


class RateVariant(enum.Enum):
    GENERAL = "General"
    AFFINE_A = "AffineA"


def _check_intersection_point(A, B, w):
    w = as_vector(w, A.dim)
    if not (A.contains(w, MEMBER_TOL) and B.contains(w, MEMBER_TOL)):
        raise ValueError("w must lie in A and in B")
    return w


def _theta_of_cones(K1: NormalCone, K2: NormalCone) -> float:
    """``max <u, v>`` over unit-ball elements ``u`` of ``K1`` and ``v`` of ``-K2``."""
    if K1.is_zero or K2.is_zero:
        return 0.0
    if K1.is_subspace and K2.is_subspace:
        # cosine of the smallest principal angle
        s = np.linalg.svd(K1.subspace @ K2.subspace.T, compute_uv=False)
        return float(np.clip(s.max(), 0.0, 1.0))
    single1 = len(K1.subspace) == 0 and len(K1.rays) == 1
    single2 = len(K2.subspace) == 0 and len(K2.rays) == 1
    if single1 and single2:
        return float(np.clip(-(K1.rays[0] @ K2.rays[0]), 0.0, 1.0))
    if K1.is_subspace and single2:
        return float(min(1.0, np.linalg.norm(K1.subspace @ K2.rays[0])))
    if single1 and K2.is_subspace:
        return float(min(1.0, np.linalg.norm(K2.subspace @ K1.rays[0])))
    raise Unsupported("normal cones with several rays have no closed form here")


def cq_number_closed_form(A: ClosedSet, B: ClosedSet, w, restricted_to: Optional[AffineSubspace] = None) -> float:
    """Exact CQ-number of the limiting normal cones at ``w``.

    With ``restricted_to=L`` both cones are first intersected with ``L - w``.
    Raises :class:`Unsupported` when a cone is not a subspace or a single ray.
    """
    w = _check_intersection_point(A, B, w)
    KA, KB = A.normal_cone(w, MEMBER_TOL), B.normal_cone(w, MEMBER_TOL)
    if restricted_to is not None:
        try:
            KA, KB = KA.restrict(restricted_to.directions), KB.restrict(restricted_to.directions)
        except NotImplementedError as exc:
            raise Unsupported(str(exc)) from None
    return _theta_of_cones(KA, KB)


def _unit_rows(vectors: np.ndarray, floor: float = 1e-14) -> np.ndarray:
    n = np.linalg.norm(vectors, axis=1)
    keep = n > floor
    return vectors[keep] / n[keep, None]


def _max_inner(U: np.ndarray, V: np.ndarray) -> float:
    best = -math.inf
    for i in range(0, len(U), _CHUNK):
        best = max(best, float((U[i:i + _CHUNK] @ V.T).max()))
    return best


def _local_normals(S: ClosedSet, w, radius: float, count: int, seed, directions=None):
    pairs = proximal_normal_sample(S, w, radius, count, seed, directions)
    feet = np.array([p for p, _ in pairs])
    normals = np.array([n for _, n in pairs])
    keep = np.linalg.norm(feet - w, axis=1) <= radius
    return feet[keep], normals[keep]


def cq_number_sampled(A: ClosedSet, B: ClosedSet, w, delta: float, count: int, seed: int,
                      restricted_to: Optional[AffineSubspace] = None) -> float:
    """Largest ``<u, -v>`` over sampled unit proximal normals near ``w``.

    ``u`` ranges over normals with feet in ``A`` within ``2 delta`` of ``w``,
    ``v`` over normals with feet in ``B`` within ``3 delta``.  The value is the
    CQ-type constant of those neighbourhoods, so it approaches the closed-form
    number as ``delta`` shrinks.
    """
    w = _check_intersection_point(A, B, w)
    if not delta > 0:
        raise ValueError("delta must be positive")
    seq_a, seq_b = np.random.SeedSequence(seed).spawn(2)
    dirs = None if restricted_to is None else restricted_to.directions
    _, nA = _local_normals(A, w, 2 * delta, count, seq_a, dirs)
    _, nB = _local_normals(B, w, 3 * delta, count, seq_b, dirs)
    if dirs is not None:
        P = restricted_to.projector
        nA, nB = nA @ P, nB @ P
    U, V = _unit_rows(nA), _unit_rows(nB)
    if len(U) == 0 or len(V) == 0:
        raise ValueError("no proximal-normal pairs near w")
    return float(np.clip(_max_inner(U, -V), 0.0, 1.0))


def linear_regularity_modulus(A: ClosedSet, B: ClosedSet, w, delta: float, count: int, seed: int,
                              intersection_oracle) -> float:
    """Largest sampled ``d_{A cap B}(x) / max(d_A(x), d_B(x))`` over ``B_{2 delta}(w)``, floored at 1."""
    w = as_vector(w, A.dim)
    if not delta > 0:
        raise ValueError("delta must be positive")
    rng = np.random.default_rng(seed)
    mu = 1.0
    for x in sample_ball(w, 2 * delta, count, rng):
        gap = max(A.distance(x), B.distance(x))
        if gap < 1e-12:
            continue
        mu = max(mu, intersection_oracle.distance(x) / gap)
    return mu


def superregularity_probe(S: ClosedSet, w, delta: float, count: int, seed: int) -> float:
    """Largest sampled ``<u, z - x> / (||u|| ||z - x||)`` over ``x, z in S cap B_delta(w)``.

    ``x`` runs over feet of proximal normals ``u``; ``z`` over those feet and
    over sampled points that fell inside ``S``.  Floored at 0.
    """
    w = as_vector(w, S.dim)
    if not S.contains(w, MEMBER_TOL):
        raise ValueError("w must lie in S")
    if not delta > 0:
        raise ValueError("delta must be positive")
    rng = np.random.default_rng(seed)
    xs = sample_ball(w, delta, count, rng)
    feet, normals, members = [], [], []
    for x in xs:
        p = S.project(x).selected
        n = x - p
        if np.linalg.norm(p - w) > delta:
            continue
        if np.linalg.norm(n) > 1e-12:
            feet.append(p)
            normals.append(n)
        else:
            members.append(p)
    if len(feet) < 2:
        raise ValueError("fewer than two distinct feet found")
    feet = np.array(feet)
    U = _unit_rows(np.array(normals))
    Z = np.vstack([feet] + ([np.array(members)] if members else []))
    eps = 0.0
    for i in range(0, len(feet), 256):
        X = feet[i:i + 256]
        D = Z[None, :, :] - X[:, None, :]
        dn = np.linalg.norm(D, axis=2)
        num = np.einsum("id,ijd->ij", U[i:i + 256], D)
        ok = dn > 1e-9
        if ok.any():
            eps = max(eps, float((num[ok] / dn[ok]).max()))
    return max(eps, 0.0)


def gamma_constant(eps_A: float, eps_B: float) -> float:
    """``(1 + (1 + 2 eps_A)^2 (1 + 2 eps_B)^2) / 2``."""
    return (1.0 + (1.0 + 2.0 * eps_A) ** 2 * (1.0 + 2.0 * eps_B) ** 2) / 2.0


@dataclass(frozen=True)
class RateBound:
    kappa_sq: float
    kappa: Optional[float]
    feasible: bool
    variant: RateVariant
    inputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"kappa_sq": self.kappa_sq, "kappa": self.kappa, "feasible": self.feasible,
                "variant": self.variant.value}


def kappa_bound(eps_A: float, eps_B: float, theta: float, mu: float,
                variant: RateVariant = RateVariant.GENERAL) -> RateBound:
    """Certified R-linear rate from regularity constants.

    General sets: ``kappa^2 = gamma - (1 - theta) / (5 mu^2)``; with ``A`` affine
    the factor 5 drops.  ``theta = 1`` is accepted and simply yields an
    infeasible bound.
    """
    if eps_A < 0 or eps_B < 0:
        raise ValueError("eps must be nonnegative")
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must be in [0, 1)")
    if mu < 1.0:
        raise ValueError("mu must be >= 1")
    variant = RateVariant(variant)
    factor = 5.0 if variant is RateVariant.GENERAL else 1.0
    kappa_sq = gamma_constant(eps_A, eps_B) - (1.0 - theta) / (factor * mu * mu)
    feasible = 0.0 <= kappa_sq < 1.0
    return RateBound(
        kappa_sq=kappa_sq,
        kappa=math.sqrt(kappa_sq) if feasible else None,
        feasible=feasible,
        variant=variant,
        inputs={"eps_A": eps_A, "eps_B": eps_B, "theta": theta, "mu": mu},
    )


def prescribe_radius(delta: float, kappa: float) -> float:
    """Radius ``delta (1 - kappa) / 2`` of guaranteed starting points around ``w``."""
    if not delta > 0 or not 0.0 <= kappa < 1.0:
        raise ValueError("need delta > 0 and kappa in [0, 1)")
    return delta * (1.0 - kappa) / 2.0


@dataclass(frozen=True)
class QuasiFNECheck:
    gamma_hat: float
    gamma_bound: float
    samples: int

    @property
    def holds(self) -> bool:
        return self.gamma_hat <= self.gamma_bound + 1e-6


def quasi_fne_check(A: ClosedSet, B: ClosedSet, w, delta: float, eps_A: float, eps_B: float,
                    count: int, seed: int, intersection_oracle) -> QuasiFNECheck:
    """Largest sampled ``(||x - x+||^2 + ||x+ - xbar||^2) / ||x - xbar||^2`` over ``B_delta(w)``.

    ``xbar`` is the oracle's nearest intersection point to ``x``.
    """
    w = _check_intersection_point(A, B, w)
    rng = np.random.default_rng(seed)
    gamma_hat, used = 0.0, 0
    for x in sample_ball(w, delta, count, rng):
        xbar = intersection_oracle.nearest(x)
        den = float(np.sum((x - xbar) ** 2))
        if den <= 1e-20:
            continue
        xp = dr_step(A, B, x).x_next
        num = float(np.sum((x - xp) ** 2) + np.sum((xp - xbar) ** 2))
        gamma_hat = max(gamma_hat, num / den)
        used += 1
    return QuasiFNECheck(gamma_hat, gamma_constant(eps_A, eps_B), used)


@dataclass(frozen=True, eq=False)
class RegularityEstimate:
    theta_bar: float
    theta_source: ThetaSource
    restricted_theta: float
    mu: float
    eps_A: float
    eps_B: float
    delta: float
    w: np.ndarray
    gamma_hat: float
    kappa_general: RateBound
    kappa_affineA: Optional[RateBound]
    prescribed_radius: Optional[float]

    @property
    def strongly_regular(self) -> bool:
        return self.theta_bar < 1.0

    @property
    def affine_hull_regular(self) -> bool:
        return self.restricted_theta < 1.0

    def to_dict(self) -> dict:
        return {
            "theta_bar": self.theta_bar,
            "theta_source": self.theta_source.value,
            "restricted_theta": self.restricted_theta,
            "mu": self.mu,
            "eps_A": self.eps_A,
            "eps_B": self.eps_B,
            "delta": self.delta,
            "gamma_hat": self.gamma_hat,
            "kappa_general": {"kappa_sq": self.kappa_general.kappa_sq,
                              "feasible": self.kappa_general.feasible},
            "kappa_affineA": None if self.kappa_affineA is None else {
                "kappa_sq": self.kappa_affineA.kappa_sq, "feasible": self.kappa_affineA.feasible},
            "prescribed_radius": self.prescribed_radius,
        }


def _theta(A, B, w, delta, count, seed, L=None):
    try:
        return cq_number_closed_form(A, B, w, L), ThetaSource.CLOSED_FORM
    except Unsupported:
        return cq_number_sampled(A, B, w, delta, count, seed, L), ThetaSource.SAMPLED


def diagnose(A: ClosedSet, B: ClosedSet, w, L: AffineSubspace, intersection_oracle,
             delta: float = 0.1, count: int = 2000, seed: int = 42,
             theta_margin: float = THETA_MARGIN) -> RegularityEstimate:
    """Estimate every regularity constant at ``w`` and turn them into rate bounds.

    Superregularity is probed at ``2 delta`` for ``A`` and ``3 delta`` for ``B``.
    The rate uses the CQ-number restricted to ``L`` plus ``theta_margin``.
    """
    w = _check_intersection_point(A, B, w)
    theta_bar, source = _theta(A, B, w, delta, count, seed)
    if L.subspace_dim == L.dim:
        restricted = theta_bar
    else:
        restricted, _ = _theta(A, B, w, delta, count, seed, L)
    mu = linear_regularity_modulus(A, B, w, delta, count, seed, intersection_oracle)
    eps_A = superregularity_probe(A, w, 2 * delta, count, seed)
    eps_B = superregularity_probe(B, w, 3 * delta, count, seed + 1)
    gamma_hat = quasi_fne_check(A, B, w, delta, eps_A, eps_B, count, seed, intersection_oracle).gamma_hat
    theta = min(restricted + theta_margin, 1.0)
    general = kappa_bound(eps_A, eps_B, theta, mu, RateVariant.GENERAL)
    affine = None
    if isinstance(A, AffineSubspace):
        affine = kappa_bound(eps_A, eps_B, theta, mu, RateVariant.AFFINE_A)
    best = min((b for b in (general, affine) if b is not None and b.feasible),
               key=lambda b: b.kappa_sq, default=None)
    radius = prescribe_radius(delta, best.kappa) if best is not None else None
    return RegularityEstimate(theta_bar, source, restricted, mu, eps_A, eps_B, delta, w,
                              gamma_hat, general, affine, radius)
