"""Closed sets with exact projectors.

Every set here is immutable and knows how to compute its full nearest-point
set, its affine hull and its limiting normal cone at a member point.  The
module-level functions (:func:`project`, :func:`reflect`, ...) are thin
wrappers so that callers can stay agnostic of the concrete variant.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
import scipy.linalg

MAX_DIM = 16
UNIT_TOL = 1e-12
ORTHO_TOL = 1e-12
GRAM_SCHMIDT_DROP = 1e-10
SPHERE_TIE_TOL = 1e-12
BOUNDARY_TOL = 1e-9


def as_vector(x, dim: int | None = None) -> np.ndarray:
    """Convert ``x`` to a finite 1-D float array, checking the dimension."""
    v = np.array(x, dtype=float).reshape(-1)
    if not 1 <= v.size <= MAX_DIM:
        raise ValueError(f"vector dimension must be in [1, {MAX_DIM}], got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    if dim is not None and v.size != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {v.size}")
    return v


def orthonormalize(vectors, dim: int, drop_tol: float = GRAM_SCHMIDT_DROP) -> np.ndarray:
    """Modified Gram-Schmidt; vectors whose residual norm is below ``drop_tol`` are dropped.

    Returns a ``(k, dim)`` array with orthonormal rows.
    """
    basis: list[np.ndarray] = []
    for v in np.asarray(vectors, dtype=float).reshape(-1, dim):
        w = v.copy()
        # two passes keep orthogonality at roundoff level
        for _ in range(2):
            for q in basis:
                w -= (q @ w) * q
        n = np.linalg.norm(w)
        if n > drop_tol:
            basis.append(w / n)
    return np.array(basis).reshape(len(basis), dim)


class Multiplicity(enum.Enum):
    UNIQUE = "unique"
    FINITE = "finite"
    CONTINUUM = "continuum"


@dataclass(frozen=True, eq=False)
class ProjectionResult:
    """Nearest points of a set to a query point.

    ``candidates`` lists the whole nearest-point set when it is finite.  For a
    continuum it holds only the deterministic selection.
    """

    selected: np.ndarray
    multiplicity: Multiplicity
    candidates: tuple
    distance: float


def _select(candidates: Sequence[np.ndarray]) -> np.ndarray:
    # lexicographically smallest candidate
    return min(candidates, key=lambda p: tuple(p))


@dataclass(frozen=True, eq=False)
class NormalCone:
    """Limiting normal cone ``span(subspace) + cone(rays)``.

    ``subspace`` has orthonormal rows, ``rays`` unit rows orthogonal to it.
    """

    subspace: np.ndarray
    rays: np.ndarray

    @classmethod
    def zero(cls, dim: int) -> "NormalCone":
        return cls(np.zeros((0, dim)), np.zeros((0, dim)))

    @classmethod
    def line(cls, v) -> "NormalCone":
        v = np.asarray(v, dtype=float)
        return cls((v / np.linalg.norm(v))[None, :], np.zeros((0, v.size)))

    @classmethod
    def ray(cls, v) -> "NormalCone":
        v = np.asarray(v, dtype=float)
        return cls(np.zeros((0, v.size)), (v / np.linalg.norm(v))[None, :])

    @property
    def is_zero(self) -> bool:
        return len(self.subspace) == 0 and len(self.rays) == 0

    @property
    def is_subspace(self) -> bool:
        return len(self.rays) == 0

    def transform(self, rotation: np.ndarray) -> "NormalCone":
        return NormalCone(self.subspace @ rotation.T, self.rays @ rotation.T)

    def restrict(self, directions: np.ndarray) -> "NormalCone":
        """Intersect with the linear subspace spanned by the orthonormal rows of ``directions``.

        Exact for subspace cones and single rays; other shapes raise ``NotImplementedError``.
        """
        dim = self.subspace.shape[1]
        proj = directions.T @ directions if len(directions) else np.zeros((dim, dim))
        if self.is_subspace:
            if len(self.subspace) == 0:
                return self
            # coefficients c with (I - P_V) S^T c = 0
            resid = (np.eye(dim) - proj) @ self.subspace.T
            coeffs = scipy.linalg.null_space(resid, rcond=1e-10)
            basis = orthonormalize((self.subspace.T @ coeffs).T, dim)
            return NormalCone(basis, np.zeros((0, dim)))
        if len(self.subspace) == 0 and len(self.rays) == 1:
            r = self.rays[0]
            if np.linalg.norm(r - proj @ r) <= 1e-10:
                return self
            return NormalCone.zero(dim)
        raise NotImplementedError("restriction of a multi-ray cone")


class ClosedSet:
    """Base class for the set variants."""

    type_name = ""
    is_convex = True

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def _nearest(self, x: np.ndarray) -> tuple[list[np.ndarray], Multiplicity]:
        raise NotImplementedError

    def affine_hull(self) -> "AffineSubspace":
        raise NotImplementedError

    def normal_cone(self, w, tol: float = BOUNDARY_TOL) -> NormalCone:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def project(self, x) -> ProjectionResult:
        x = as_vector(x, self.dim)
        candidates, mult = self._nearest(x)
        selected = candidates[0] if len(candidates) == 1 else _select(candidates)
        return ProjectionResult(
            selected=selected,
            multiplicity=mult,
            candidates=tuple(candidates),
            distance=float(np.linalg.norm(x - selected)),
        )

    def reflect(self, x) -> ProjectionResult:
        x = as_vector(x, self.dim)
        p = self.project(x)
        return ProjectionResult(
            selected=2.0 * p.selected - x,
            multiplicity=p.multiplicity,
            candidates=tuple(2.0 * c - x for c in p.candidates),
            distance=p.distance,
        )

    def distance(self, x) -> float:
        return self.project(x).distance

    def contains(self, x, tol: float = 0.0) -> bool:
        if tol < 0:
            raise ValueError("tol must be nonnegative")
        return self.distance(x) <= tol

    def _check_member(self, w, tol):
        w = as_vector(w, self.dim)
        if not self.contains(w, tol):
            raise ValueError("normal cone requested at a point outside the set")
        return w


def _full_space(base: np.ndarray) -> "AffineSubspace":
    return AffineSubspace(base, np.eye(base.size))


@dataclass(frozen=True, eq=False)
class AffineSubspace(ClosedSet):
    """``base_point + span(directions)``; directions are orthonormalized on construction."""

    base_point: np.ndarray
    directions: np.ndarray = field(default=None)

    type_name = "affine_subspace"

    def __post_init__(self):
        base = as_vector(self.base_point)
        dirs = self.directions
        if dirs is None:
            dirs = np.zeros((0, base.size))
        dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
        if dirs.size and dirs.shape[1] != base.size:
            raise ValueError("dimension mismatch between base point and directions")
        dirs = orthonormalize(dirs, base.size)
        object.__setattr__(self, "base_point", base)
        object.__setattr__(self, "directions", dirs)

    @classmethod
    def full(cls, dim: int, base=None) -> "AffineSubspace":
        base = np.zeros(dim) if base is None else base
        return cls(base, np.eye(dim))

    @property
    def dim(self) -> int:
        return self.base_point.size

    @property
    def subspace_dim(self) -> int:
        return len(self.directions)

    @property
    def projector(self) -> np.ndarray:
        """Orthogonal projector onto the direction space."""
        return self.directions.T @ self.directions

    def complement_basis(self) -> np.ndarray:
        """Orthonormal rows spanning the orthogonal complement of the direction space."""
        if self.subspace_dim == 0:
            return np.eye(self.dim)
        return scipy.linalg.null_space(self.directions).T.reshape(-1, self.dim)

    def _nearest(self, x):
        p = self.base_point + self.directions.T @ (self.directions @ (x - self.base_point))
        return [p], Multiplicity.UNIQUE

    def affine_hull(self):
        return self

    def normal_cone(self, w, tol=BOUNDARY_TOL):
        self._check_member(w, tol)
        return NormalCone(self.complement_basis(), np.zeros((0, self.dim)))

    def to_dict(self):
        return {
            "type": self.type_name,
            "base_point": self.base_point.tolist(),
            "directions": self.directions.tolist(),
        }


def _unit(normal) -> np.ndarray:
    n = as_vector(normal)
    if abs(np.linalg.norm(n) - 1.0) > UNIT_TOL:
        raise ValueError("normal must have unit norm")
    return n


@dataclass(frozen=True, eq=False)
class HalfSpace(ClosedSet):
    """Points with ``<normal, x> <= offset``."""

    normal: np.ndarray
    offset: float

    type_name = "half_space"

    def __post_init__(self):
        object.__setattr__(self, "normal", _unit(self.normal))
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def from_inequality(cls, g, h: float) -> "HalfSpace":
        """Build ``{x : <g, x> <= h}`` for a non-unit ``g``."""
        g = as_vector(g)
        n = np.linalg.norm(g)
        return cls(g / n, h / n)

    @property
    def dim(self):
        return self.normal.size

    def _nearest(self, x):
        excess = self.normal @ x - self.offset
        if excess <= 0:
            return [x.copy()], Multiplicity.UNIQUE
        return [x - excess * self.normal], Multiplicity.UNIQUE

    def affine_hull(self):
        return _full_space(self.offset * self.normal)

    def normal_cone(self, w, tol=BOUNDARY_TOL):
        w = self._check_member(w, tol)
        if abs(self.normal @ w - self.offset) <= tol:
            return NormalCone.ray(self.normal)
        return NormalCone.zero(self.dim)

    def to_dict(self):
        return {"type": self.type_name, "normal": self.normal.tolist(), "offset": self.offset}


@dataclass(frozen=True, eq=False)
class Slab(ClosedSet):
    """Points with ``lo <= <normal, x> <= hi``."""

    normal: np.ndarray
    lo: float
    hi: float

    type_name = "slab"

    def __post_init__(self):
        object.__setattr__(self, "normal", _unit(self.normal))
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        if self.lo > self.hi:
            raise ValueError("slab requires lo <= hi")

    @classmethod
    def from_inequality(cls, g, lo: float, hi: float) -> "Slab":
        """Build ``{x : lo <= <g, x> <= hi}`` for a non-unit ``g``."""
        g = as_vector(g)
        n = np.linalg.norm(g)
        return cls(g / n, lo / n, hi / n)

    @property
    def dim(self):
        return self.normal.size

    def _nearest(self, x):
        s = self.normal @ x
        c = min(max(s, self.lo), self.hi)
        if c == s:
            return [x.copy()], Multiplicity.UNIQUE
        return [x + (c - s) * self.normal], Multiplicity.UNIQUE

    def affine_hull(self):
        if self.lo == self.hi:
            dirs = scipy.linalg.null_space(self.normal[None, :]).T
            return AffineSubspace(self.lo * self.normal, dirs)
        return _full_space(self.lo * self.normal)

    def normal_cone(self, w, tol=BOUNDARY_TOL):
        w = self._check_member(w, tol)
        if self.lo == self.hi:
            return NormalCone.line(self.normal)
        s = self.normal @ w
        if abs(s - self.hi) <= tol:
            return NormalCone.ray(self.normal)
        if abs(s - self.lo) <= tol:
            return NormalCone.ray(-self.normal)
        return NormalCone.zero(self.dim)

    def to_dict(self):
        return {"type": self.type_name, "normal": self.normal.tolist(), "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True, eq=False)
class Ball(ClosedSet):
    center: np.ndarray
    radius: float

    type_name = "ball"

    def __post_init__(self):
        object.__setattr__(self, "center", as_vector(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def dim(self):
        return self.center.size

    def _nearest(self, x):
        v = x - self.center
        n = np.linalg.norm(v)
        if n <= self.radius:
            return [x.copy()], Multiplicity.UNIQUE
        return [self.center + (self.radius / n) * v], Multiplicity.UNIQUE

    def affine_hull(self):
        return _full_space(self.center)

    def normal_cone(self, w, tol=BOUNDARY_TOL):
        w = self._check_member(w, tol)
        v = w - self.center
        if abs(np.linalg.norm(v) - self.radius) <= tol:
            return NormalCone.ray(v)
        return NormalCone.zero(self.dim)

    def to_dict(self):
        return {"type": self.type_name, "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Sphere(ClosedSet):
    """Sphere ``{x : ||x - center|| = radius}``; the only nonconvex variant."""

    center: np.ndarray
    radius: float

    type_name = "sphere"
    is_convex = False

    def __post_init__(self):
        object.__setattr__(self, "center", as_vector(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def dim(self):
        return self.center.size

    def _nearest(self, x):
        v = x - self.center
        n = np.linalg.norm(v)
        if n <= SPHERE_TIE_TOL:
            e1 = np.zeros(self.dim)
            e1[0] = 1.0
            if self.dim == 1:
                # the 1-D sphere is two points, both nearest
                return [self.center - self.radius * e1, self.center + self.radius * e1], Multiplicity.FINITE
            return [self.center + self.radius * e1], Multiplicity.CONTINUUM
        return [self.center + (self.radius / n) * v], Multiplicity.UNIQUE

    def affine_hull(self):
        return _full_space(self.center)

    def normal_cone(self, w, tol=BOUNDARY_TOL):
        w = self._check_member(w, tol)
        return NormalCone.line(w - self.center)

    def to_dict(self):
        return {"type": self.type_name, "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Box(ClosedSet):
    lo: np.ndarray
    hi: np.ndarray

    type_name = "box"

    def __post_init__(self):
        lo = as_vector(self.lo)
        hi = as_vector(self.hi, lo.size)
        if np.any(lo > hi):
            raise ValueError("box requires lo <= hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return self.lo.size

    def _nearest(self, x):
        return [np.clip(x, self.lo, self.hi)], Multiplicity.UNIQUE

    def affine_hull(self):
        free = np.eye(self.dim)[self.lo < self.hi]
        return AffineSubspace(self.lo, free)

    def normal_cone(self, w, tol=BOUNDARY_TOL):
        w = self._check_member(w, tol)
        eye = np.eye(self.dim)
        lines, rays = [], []
        for i in range(self.dim):
            if self.lo[i] == self.hi[i]:
                lines.append(eye[i])
            elif abs(w[i] - self.hi[i]) <= tol:
                rays.append(eye[i])
            elif abs(w[i] - self.lo[i]) <= tol:
                rays.append(-eye[i])
        return NormalCone(np.array(lines).reshape(-1, self.dim), np.array(rays).reshape(-1, self.dim))

    def to_dict(self):
        return {"type": self.type_name, "lo": self.lo.tolist(), "hi": self.hi.tolist()}


def _depressed_cubic_roots(p: float, q: float) -> list[float]:
    """Real roots of ``t**3 + p*t + q = 0``."""
    if p == 0.0:
        return [float(np.cbrt(-q))]
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if disc > 0:
        s = math.sqrt(disc)
        return [float(np.cbrt(-q / 2.0 + s) + np.cbrt(-q / 2.0 - s))]
    if disc == 0:
        return [3.0 * q / p, -1.5 * q / p]
    m = 2.0 * math.sqrt(-p / 3.0)
    arg = max(-1.0, min(1.0, (3.0 * q / (2.0 * p)) * math.sqrt(-3.0 / p)))
    phi = math.acos(arg) / 3.0
    return [m * math.cos(phi - 2.0 * math.pi * k / 3.0) for k in range(3)]


@dataclass(frozen=True, eq=False)
class ParabolaHypograph(ClosedSet):
    """``{(x1, x2) : x2 <= -a * x1**2}`` in the plane (convex)."""

    a: float

    type_name = "parabola_hypograph"

    def __post_init__(self):
        object.__setattr__(self, "a", float(self.a))
        if not self.a > 0:
            raise ValueError("a must be positive")

    @property
    def dim(self):
        return 2

    def _nearest(self, x):
        x1, x2 = x
        a = self.a
        if x2 <= -a * x1 * x1:
            return [x.copy()], Multiplicity.UNIQUE
        # stationarity of (t - x1)^2 + (a t^2 + x2)^2: 2a^2 t^3 + (1 + 2a x2) t - x1 = 0
        c3, c1 = 2.0 * a * a, 1.0 + 2.0 * a * x2
        best, best_d = None, math.inf
        for t in _depressed_cubic_roots(c1 / c3, -x1 / c3):
            for _ in range(3):
                fp = 3.0 * c3 * t * t + c1
                if fp == 0.0:
                    break
                t -= (c3 * t ** 3 + c1 * t - x1) / fp
            foot = np.array([t, -a * t * t])
            d = np.linalg.norm(x - foot)
            if d < best_d:
                best, best_d = foot, d
        return [best], Multiplicity.UNIQUE

    def affine_hull(self):
        return _full_space(np.zeros(2))

    def normal_cone(self, w, tol=BOUNDARY_TOL):
        w = self._check_member(w, tol)
        if abs(w[1] + self.a * w[0] ** 2) <= tol:
            return NormalCone.ray([2.0 * self.a * w[0], 1.0])
        return NormalCone.zero(2)

    def to_dict(self):
        return {"type": self.type_name, "a": self.a}


@dataclass(frozen=True, eq=False)
class Transformed(ClosedSet):
    """Image ``{rotation @ s + shift : s in inner}`` under a rigid motion."""

    inner: ClosedSet
    rotation: np.ndarray = None
    shift: np.ndarray = None

    type_name = "transformed"

    def __post_init__(self):
        d = self.inner.dim
        q = np.eye(d) if self.rotation is None else np.asarray(self.rotation, dtype=float)
        if q.shape != (d, d) or not np.allclose(q.T @ q, np.eye(d), atol=ORTHO_TOL * 100):
            raise ValueError("rotation must be an orthogonal matrix matching the inner dimension")
        t = np.zeros(d) if self.shift is None else as_vector(self.shift, d)
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "shift", t)

    @property
    def is_convex(self):
        return self.inner.is_convex

    @property
    def dim(self):
        return self.inner.dim

    def _to_inner(self, x):
        return self.rotation.T @ (x - self.shift)

    def _from_inner(self, s):
        return self.rotation @ s + self.shift

    def _nearest(self, x):
        res = self.inner.project(self._to_inner(x))
        return [self._from_inner(c) for c in res.candidates], res.multiplicity

    def project(self, x):
        x = as_vector(x, self.dim)
        res = self.inner.project(self._to_inner(x))
        cands = tuple(self._from_inner(c) for c in res.candidates)
        sel = self._from_inner(res.selected)
        return ProjectionResult(sel, res.multiplicity, cands, float(np.linalg.norm(x - sel)))

    def affine_hull(self):
        h = self.inner.affine_hull()
        return AffineSubspace(self._from_inner(h.base_point), h.directions @ self.rotation.T)

    def normal_cone(self, w, tol=BOUNDARY_TOL):
        w = self._check_member(w, tol)
        return self.inner.normal_cone(self._to_inner(w), tol).transform(self.rotation)

    def to_dict(self):
        return {
            "type": self.type_name,
            "inner": self.inner.to_dict(),
            "rotation": self.rotation.tolist(),
            "shift": self.shift.tolist(),
        }


_VARIANTS = {
    cls.type_name: cls
    for cls in (AffineSubspace, HalfSpace, Slab, Ball, Sphere, Box, ParabolaHypograph, Transformed)
}


def set_from_dict(data: dict[str, Any]) -> ClosedSet:
    """Build a set from its JSON object, e.g. ``{"type": "sphere", "center": [0, 0], "radius": 1.0}``."""
    data = dict(data)
    try:
        cls = _VARIANTS[data.pop("type")]
    except KeyError as exc:
        raise ValueError(f"unknown or missing set type: {exc}") from None
    if cls is Transformed:
        data["inner"] = set_from_dict(data["inner"])
    if cls is AffineSubspace and "directions" in data:
        dirs = data["directions"]
        data["directions"] = np.asarray(dirs, dtype=float).reshape(len(dirs), -1) if len(dirs) else None
    try:
        return cls(**data)
    except TypeError as exc:
        raise ValueError(f"bad fields for {cls.type_name}: {exc}") from None


def set_to_dict(s: ClosedSet) -> dict[str, Any]:
    return s.to_dict()


def contains(s: ClosedSet, x, tol: float = 0.0) -> bool:
    return s.contains(x, tol)


def project(s: ClosedSet, x) -> ProjectionResult:
    return s.project(x)


def reflect(s: ClosedSet, x) -> ProjectionResult:
    return s.reflect(x)


def distance(s: ClosedSet, x) -> float:
    return s.distance(x)


def affine_hull(s: ClosedSet) -> AffineSubspace:
    return s.affine_hull()


def sample_ball(base, radius: float, count: int, rng: np.random.Generator, directions=None) -> np.ndarray:
    """Uniform samples from the ball ``B_radius(base)``.

    With ``directions`` (orthonormal rows) the ball is taken inside ``base + span(directions)``.
    """
    base = np.asarray(base, dtype=float)
    basis = np.eye(base.size) if directions is None else np.asarray(directions)
    k = len(basis)
    g = rng.standard_normal((count, k))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / k)
    return base + (g * r[:, None]) @ basis


def proximal_normal_sample(
    s: ClosedSet, base, radius: float, count: int, seed: int, directions=None
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Sample ``(foot, x - foot)`` proximal-normal pairs from points near ``base``.

    Points landing in the set carry no normal information and are dropped, so
    fewer than ``count`` pairs may come back.
    """
    if radius <= 0 or count < 1:
        raise ValueError("need radius > 0 and count >= 1")
    base = as_vector(base, s.dim)
    rng = np.random.default_rng(seed)
    pairs = []
    for x in sample_ball(base, radius, count, rng, directions):
        foot = s.project(x).selected
        normal = x - foot
        if np.linalg.norm(normal) > SPHERE_TIE_TOL:
            pairs.append((foot, normal))
    if not pairs:
        raise ValueError("no proximal normals produced: every sample landed inside the set")
    return pairs
