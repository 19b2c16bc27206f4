"""Nearest-point oracles for the intersection of two sets.

Closed forms are used whenever the pair allows it: affine/affine, polyhedral
pairs (active-set enumeration), circle/circle and circle/line in the plane.
Other convex pairs go through Dykstra's algorithm and the remaining
nonconvex pairs through a coarse-to-fine grid search.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import scipy.linalg

from .sets import AffineSubspace, Box, ClosedSet, HalfSpace, Slab, Sphere, as_vector

class EmptyIntersection(ValueError):
    pass


class IntersectionOracle:
    """Base class: subclasses implement :meth:`nearest`."""

    def nearest(self, x) -> np.ndarray:
        raise NotImplementedError

    def distance(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.linalg.norm(x - self.nearest(x)))

    def __call__(self, x) -> np.ndarray:
        return self.nearest(x)


class FinitePoints(IntersectionOracle):
    def __init__(self, points):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        if len(self.points) == 0:
            raise EmptyIntersection("no intersection points")

    def nearest(self, x):
        d = np.linalg.norm(self.points - np.asarray(x, dtype=float), axis=1)
        return self.points[int(np.argmin(d))].copy()


class AffineOracle(IntersectionOracle):
    def __init__(self, subspace: AffineSubspace):
        self.subspace = subspace

    def nearest(self, x):
        return self.subspace.project(x).selected


def intersect_affine(L1: AffineSubspace, L2: AffineSubspace, tol: float = 1e-9) -> AffineSubspace:
    """Intersection of two affine subspaces as an affine subspace."""
    c1, c2 = L1.complement_basis(), L2.complement_basis()
    C = np.vstack([c1, c2])
    rhs = np.concatenate([c1 @ L1.base_point, c2 @ L2.base_point])
    if len(C) == 0:
        return AffineSubspace(L1.base_point, np.eye(L1.dim))
    point, *_ = np.linalg.lstsq(C, rhs, rcond=None)
    if np.linalg.norm(C @ point - rhs) > tol:
        raise EmptyIntersection("affine subspaces do not meet")
    dirs = scipy.linalg.null_space(C).T
    return AffineSubspace(point, dirs.reshape(-1, L1.dim))


def polyhedral_constraints(s: ClosedSet):
    """``(E, f, G, h)`` with ``s = {x : E x = f, G x <= h}``, or ``None`` if ``s`` is not polyhedral."""
    d = s.dim
    empty = (np.zeros((0, d)), np.zeros(0))
    if isinstance(s, AffineSubspace):
        E = s.complement_basis()
        return E, E @ s.base_point, *empty
    if isinstance(s, HalfSpace):
        return (*empty, s.normal[None, :], np.array([s.offset]))
    if isinstance(s, Slab):
        if s.lo == s.hi:
            return s.normal[None, :], np.array([s.lo]), *empty
        return (*empty, np.vstack([s.normal, -s.normal]), np.array([s.hi, -s.lo]))
    if isinstance(s, Box):
        eye = np.eye(d)
        fixed = s.lo == s.hi
        free = ~fixed
        G = np.vstack([eye[free], -eye[free]])
        h = np.concatenate([s.hi[free], -s.lo[free]])
        return eye[fixed], s.lo[fixed], G, h
    return None


class Polyhedron(IntersectionOracle):
    """Exact projection onto ``{E x = f, G x <= h}`` by enumerating candidate active sets."""

    def __init__(self, E, f, G, h, max_combinations: int = 20000):
        self.E, self.f = np.asarray(E, float), np.asarray(f, float)
        self.G, self.h = np.asarray(G, float), np.asarray(h, float)
        d = self.G.shape[1] if self.G.size else self.E.shape[1]
        self.dim = d
        rank = np.linalg.matrix_rank(self.E) if len(self.E) else 0
        kmax = min(d - rank, len(self.G))
        subsets = [s for k in range(kmax + 1) for s in itertools.combinations(range(len(self.G)), k)]
        if len(subsets) > max_combinations:
            raise ValueError("too many active-set combinations")
        # each face: z = x - M^T K (M x - m), K = pinv(M M^T)
        self.faces = []
        for subset in subsets:
            M = np.vstack([self.E, self.G[list(subset)]])
            m = np.concatenate([self.f, self.h[list(subset)]])
            K = np.linalg.pinv(M @ M.T) if len(M) else np.zeros((0, 0))
            self.faces.append((M, m, K))

    @classmethod
    def from_sets(cls, A: ClosedSet, B: ClosedSet) -> "Polyhedron":
        ca, cb = polyhedral_constraints(A), polyhedral_constraints(B)
        if ca is None or cb is None:
            raise ValueError("both sets must be polyhedral")
        return cls(*(np.concatenate([p, q]) for p, q in zip(ca, cb)))

    def feasible(self, z, tol=1e-9) -> bool:
        ok_eq = not len(self.E) or np.max(np.abs(self.E @ z - self.f)) <= tol
        ok_in = not len(self.G) or np.max(self.G @ z - self.h) <= tol
        return bool(ok_eq and ok_in)

    def nearest(self, x):
        x = as_vector(x, self.dim)
        best, best_d = None, math.inf
        for M, m, K in self.faces:
            if len(M) == 0:
                z = x
            else:
                z = x - M.T @ (K @ (M @ x - m))
                if np.linalg.norm(M @ z - m) > 1e-9:
                    continue
            if self.feasible(z):
                d = np.linalg.norm(x - z)
                if d < best_d:
                    best, best_d = z, d
        if best is None:
            raise EmptyIntersection("polyhedron is empty")
        return best


class Dykstra(IntersectionOracle):
    """Dykstra's alternating projections; converges to the projection onto ``A cap B`` for convex sets."""

    def __init__(self, A: ClosedSet, B: ClosedSet, max_iter: int = 200_000, tol: float = 1e-15):
        if not (A.is_convex and B.is_convex):
            raise ValueError("Dykstra's algorithm needs convex sets")
        self.A, self.B, self.max_iter, self.tol = A, B, max_iter, tol

    def nearest(self, x):
        x = as_vector(x, self.A.dim)
        p = np.zeros_like(x)
        q = np.zeros_like(x)
        for _ in range(self.max_iter):
            y = self.A.project(x + p).selected
            p = x + p - y
            x_new = self.B.project(y + q).selected
            q = y + q - x_new
            if np.linalg.norm(x_new - x) <= self.tol and np.linalg.norm(x_new - y) <= 1e-12:
                return x_new
            x = x_new
        if self.A.distance(x) > 1e-8:
            raise EmptyIntersection("Dykstra iteration did not reach the intersection")
        return x


def circle_circle_points(s1: Sphere, s2: Sphere) -> np.ndarray:
    c1, c2, r1, r2 = s1.center, s2.center, s1.radius, s2.radius
    v = c2 - c1
    dist = np.linalg.norm(v)
    if dist == 0 or dist > r1 + r2 or dist < abs(r1 - r2):
        raise EmptyIntersection("circles do not meet")
    along = (dist ** 2 + r1 ** 2 - r2 ** 2) / (2 * dist)
    h = math.sqrt(max(r1 ** 2 - along ** 2, 0.0))
    e = v / dist
    perp = np.array([-e[1], e[0]])
    mid = c1 + along * e
    pts = [mid + h * perp, mid - h * perp]
    return np.array(pts if h > 0 else pts[:1])


def circle_line_points(s: Sphere, line: AffineSubspace) -> np.ndarray:
    foot = line.project(s.center).selected
    off = np.linalg.norm(foot - s.center)
    if off > s.radius:
        raise EmptyIntersection("line misses the circle")
    h = math.sqrt(max(s.radius ** 2 - off ** 2, 0.0))
    t = line.directions[0]
    pts = [foot + h * t, foot - h * t]
    return np.array(pts if h > 0 else pts[:1])


class GridSearch(IntersectionOracle):
    """Local coarse-to-fine grid search for ``A cap B`` around the query point.

    A grid point counts as feasible when both distances are within half a grid
    diagonal; the best point is refined down to ``pitch`` and then polished by
    alternating projections.  Intended for low dimensions only.
    """

    def __init__(self, A: ClosedSet, B: ClosedSet, radius: float = 2.0, pitch: float = 1e-4,
                 points_per_axis: int | None = None, keep: int = 5):
        if A.dim > 3:
            raise ValueError("grid search supports dimension <= 3")
        self.A, self.B, self.radius, self.pitch, self.keep = A, B, radius, pitch, keep
        self.n = points_per_axis or {1: 401, 2: 61, 3: 21}[A.dim]

    def _gap(self, z):
        return max(self.A.distance(z), self.B.distance(z))

    def _scan(self, center, half):
        d = self.A.dim
        axis = np.linspace(-half, half, self.n)
        h = axis[1] - axis[0]
        slack = 0.5 * h * math.sqrt(d)
        hits = []
        for off in itertools.product(axis, repeat=d):
            z = center + np.array(off)
            if self._gap(z) <= slack:
                hits.append(z)
        return hits, h

    def nearest(self, x):
        x = as_vector(x, self.A.dim)
        half = max(self.radius, 2.0 * max(self.A.distance(x), self.B.distance(x)))
        centers = [x]
        h = math.inf
        while True:
            hits = []
            for c in centers:
                found, h = self._scan(c, half)
                hits += found
            if not hits:
                raise EmptyIntersection("grid search found no intersection point")
            hits.sort(key=lambda z: np.linalg.norm(z - x))
            centers = hits[: self.keep]
            if h <= self.pitch:
                break
            half = 2.0 * h
        best, best_d = None, math.inf
        for z in centers:
            for _ in range(500):
                z = self.A.project(self.B.project(z).selected).selected
            if self._gap(z) <= 1e-9:
                d = np.linalg.norm(z - x)
                if d < best_d:
                    best, best_d = z, d
        return centers[0] if best is None else best


def _as_line_2d(s: ClosedSet):
    if isinstance(s, AffineSubspace) and s.dim == 2 and s.subspace_dim == 1:
        return s
    return None


def intersection_oracle(A: ClosedSet, B: ClosedSet) -> IntersectionOracle:
    """Pick the most exact oracle available for ``A cap B``."""
    if isinstance(A, AffineSubspace) and isinstance(B, AffineSubspace):
        return AffineOracle(intersect_affine(A, B))
    if polyhedral_constraints(A) is not None and polyhedral_constraints(B) is not None:
        try:
            return Polyhedron.from_sets(A, B)
        except ValueError:
            return Dykstra(A, B)
    if A.dim == 2:
        if isinstance(A, Sphere) and isinstance(B, Sphere):
            return FinitePoints(circle_circle_points(A, B))
        if isinstance(A, Sphere) and _as_line_2d(B):
            return FinitePoints(circle_line_points(A, B))
        if isinstance(B, Sphere) and _as_line_2d(A):
            return FinitePoints(circle_line_points(B, A))
    if A.is_convex and B.is_convex:
        return Dykstra(A, B)
    return GridSearch(A, B)
