"""Douglas-Rachford iteration with full per-step bookkeeping."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .sets import ClosedSet, as_vector, sample_ball

DIVERGENCE_GUARD = 1e12


class StopReason(enum.Enum):
    RESIDUAL_BELOW_TOL = "ResidualBelowTol"
    MAX_ITERS = "MaxIters"
    DIVERGED = "Diverged"


@dataclass(frozen=True, eq=False)
class DRStepRecord:
    """One DR step: ``a in P_A x``, ``u = 2a - x``, ``b in P_B u``, ``x_next = b + x - a``."""

    x: np.ndarray
    a: np.ndarray
    u: np.ndarray
    b: np.ndarray
    x_next: np.ndarray
    residual: float


@dataclass(eq=False)
class Trajectory:
    steps: list[DRStepRecord]
    shadows_A: list[np.ndarray]
    shadows_B: list[np.ndarray]
    stop_reason: StopReason
    limit_estimate: Optional[np.ndarray] = None
    tol: float = 0.0

    @property
    def iterates(self) -> np.ndarray:
        """``x_0, ..., x_N`` as an ``(N + 1, d)`` array."""
        return np.array([s.x for s in self.steps] + [self.steps[-1].x_next])

    @property
    def residuals(self) -> np.ndarray:
        return np.array([s.residual for s in self.steps])

    @property
    def x0(self) -> np.ndarray:
        return self.steps[0].x

    @property
    def converged(self) -> bool:
        return self.stop_reason is StopReason.RESIDUAL_BELOW_TOL

    def summary(self) -> dict:
        return {
            "stop_reason": self.stop_reason.value,
            "iters": len(self.steps),
            "final_residual": float(self.steps[-1].residual),
            "limit": None if self.limit_estimate is None else self.limit_estimate.tolist(),
        }

    def csv_header(self) -> list[str]:
        d = self.steps[0].x.size
        cols = ["n"]
        for name in ("x", "a", "u", "b"):
            cols += [f"{name}{i + 1}" for i in range(d)]
        return cols + ["residual", "dist_A", "dist_B"]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.csv_header())
            for n, (s, pb) in enumerate(zip(self.steps, self.shadows_B)):
                row = [n, *s.x, *s.a, *s.u, *s.b]
                row += [s.residual, np.linalg.norm(s.x - s.a), np.linalg.norm(s.x - pb)]
                w.writerow([repr(float(v)) if not isinstance(v, int) else v for v in row])


def dr_step(A: ClosedSet, B: ClosedSet, x) -> DRStepRecord:
    x = as_vector(x, A.dim)
    if B.dim != A.dim:
        raise ValueError("dimension mismatch between A and B")
    a = A.project(x).selected
    u = 2.0 * a - x
    b = B.project(u).selected
    x_next = b + x - a
    return DRStepRecord(x=x, a=a, u=u, b=b, x_next=x_next, residual=float(np.linalg.norm(x_next - x)))


def run(A: ClosedSet, B: ClosedSet, x0, max_iters: int = 100_000, tol: float = 1e-12) -> Trajectory:
    """Iterate the DR operator from ``x0``.

    Stops when the step residual drops to ``tol`` (the last ``x_next`` is then
    the limit estimate), after ``max_iters`` steps, or when the iterate norm
    exceeds the divergence guard.
    """
    if max_iters < 1 or not tol > 0:
        raise ValueError("need max_iters >= 1 and tol > 0")
    x = as_vector(x0, A.dim)
    steps, sh_a, sh_b = [], [], []
    reason = StopReason.MAX_ITERS
    for _ in range(max_iters):
        rec = dr_step(A, B, x)
        steps.append(rec)
        sh_a.append(rec.a)
        sh_b.append(B.project(x).selected)
        x = rec.x_next
        if rec.residual <= tol:
            reason = StopReason.RESIDUAL_BELOW_TOL
            break
        if np.linalg.norm(x) > DIVERGENCE_GUARD:
            reason = StopReason.DIVERGED
            break
    limit = steps[-1].x_next if reason is StopReason.RESIDUAL_BELOW_TOL else None
    return Trajectory(steps, sh_a, sh_b, reason, limit, tol)


def fixed_point_residual(A: ClosedSet, B: ClosedSet, x) -> float:
    """``min ||x_+ - x||`` over every enumerable branch ``x_+ in T x``."""
    x = as_vector(x, A.dim)
    best = math.inf
    for a in A.project(x).candidates:
        for b in B.project(2.0 * a - x).candidates:
            best = min(best, float(np.linalg.norm(b - a)))
    return best


@dataclass(eq=False)
class StepSizeProbe:
    """Samples of ``(||x - x_+||, d_{A cap B}(x))`` near an intersection point.

    ``lambda_hat`` is the smallest observed ``sqrt(5) * lhs / rhs`` over samples
    with ``rhs`` above the floor, or ``None`` when no such sample exists.
    """

    pairs: list[tuple[float, float]]
    lambda_hat: Optional[float]
    floor: float

    @property
    def positive(self) -> bool:
        """True when every sample away from the intersection moved."""
        return all(lhs > 0 for lhs, rhs in self.pairs if rhs > self.floor)


def lemma43_probe(
    A: ClosedSet,
    B: ClosedSet,
    w,
    sample_radius: float,
    count: int,
    seed: int,
    intersection_oracle,
    floor: float = 1e-12,
    include_center: bool = False,
) -> StepSizeProbe:
    w = as_vector(w, A.dim)
    if not (A.contains(w, 1e-9) and B.contains(w, 1e-9)):
        raise ValueError("w must lie in both sets")
    rng = np.random.default_rng(seed)
    xs = sample_ball(w, sample_radius, count, rng)
    if include_center:
        xs = np.vstack([w[None, :], xs])
    pairs = []
    for x in xs:
        lhs = dr_step(A, B, x).residual
        rhs = intersection_oracle.distance(x)
        pairs.append((lhs, rhs))
    ratios = [math.sqrt(5.0) * lhs / rhs for lhs, rhs in pairs if rhs > floor]
    return StepSizeProbe(pairs, min(ratios) if ratios else None, floor)
