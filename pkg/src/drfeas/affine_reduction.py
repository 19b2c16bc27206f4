"""Reduction of DR runs to the affine hull ``L = aff(A u B)``.

Projecting a DR sequence onto ``L`` gives another DR sequence and leaves a
constant offset ``x_n - P_L x_n = x_0 - P_L x_0``.  The helpers below compute
``L`` from the exact hulls of the two sets and check those identities on
recorded trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dr_core import Trajectory, dr_step, run
from .sets import AffineSubspace, ClosedSet, orthonormalize

OFFSET_TOL = 1e-8
STEP_TOL = 1e-9


class AffineReductionError(RuntimeError):
    """Raised when the constant-offset identity breaks; signals a bug, not bad input."""


@dataclass(frozen=True, eq=False)
class AffineHullPair:
    L: AffineSubspace
    offset_basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.L.subspace_dim

    @property
    def is_full(self) -> bool:
        return self.L.subspace_dim == self.L.dim


def affine_hull_union(A: ClosedSet, B: ClosedSet) -> AffineHullPair:
    ha, hb = A.affine_hull(), B.affine_hull()
    if ha.dim != hb.dim:
        raise ValueError("dimension mismatch between A and B")
    dirs = orthonormalize(
        np.vstack([ha.directions, hb.directions, (hb.base_point - ha.base_point)[None, :]]), ha.dim
    )
    L = AffineSubspace(ha.base_point, dirs)
    return AffineHullPair(L, L.complement_basis())


@dataclass(eq=False)
class ReducedTrajectory:
    """``y_n = P_L x_n`` with the per-step identity checks.

    ``offset_check[n]`` is ``||(x_n - y_n) - (x_0 - y_0)||``; ``step_mismatch[n]``
    compares ``y_{n+1}`` with a fresh DR step taken from ``y_n``.
    """

    y: np.ndarray
    offset: np.ndarray
    offset_check: np.ndarray
    step_mismatch: np.ndarray
    L: AffineSubspace

    @property
    def max_offset_deviation(self) -> float:
        return float(self.offset_check.max())

    @property
    def steps_ok(self) -> bool:
        return bool(self.step_mismatch.size == 0 or self.step_mismatch.max() <= STEP_TOL)

    def report(self) -> dict:
        return {
            "L_dim": self.L.subspace_dim,
            "offset_norm": float(np.linalg.norm(self.offset)),
            "max_offset_deviation": self.max_offset_deviation,
            "theorem33_ok": bool(self.max_offset_deviation <= OFFSET_TOL and self.steps_ok),
        }


def reduce_trajectory(traj: Trajectory, L: AffineSubspace, A: Optional[ClosedSet] = None,
                      B: Optional[ClosedSet] = None) -> ReducedTrajectory:
    """Project every iterate onto ``L`` and check the offset and step identities.

    The step check needs the two sets; without them ``step_mismatch`` is empty.
    Multi-valued projections along the reduced path may pick a different branch
    than the original run; those show up as mismatches and are not resolved.
    """
    if not traj.steps:
        raise ValueError("empty trajectory")
    xs = traj.iterates
    ys = np.array([L.project(x).selected for x in xs])
    offset = xs[0] - ys[0]
    check = np.linalg.norm((xs - ys) - offset, axis=1)
    if check.max() > OFFSET_TOL:
        raise AffineReductionError(f"offset drifted by {check.max():.3e}")
    mismatch = np.zeros(0)
    if A is not None and B is not None:
        mismatch = np.array([
            np.linalg.norm(dr_step(A, B, ys[n]).x_next - ys[n + 1]) for n in range(len(ys) - 1)
        ])
    return ReducedTrajectory(ys, offset, check, mismatch, L)


def reduced_run_deviation(traj: Trajectory, L: AffineSubspace, A: ClosedSet, B: ClosedSet) -> float:
    """Largest gap between ``P_L x_n`` and an independent DR run started at ``P_L x_0``."""
    xs = traj.iterates
    y0 = L.project(xs[0]).selected
    other = run(A, B, y0, max_iters=len(traj.steps), tol=traj.tol or 1e-12)
    ys = other.iterates
    n = min(len(xs), len(ys))
    proj = np.array([L.project(x).selected for x in xs[:n]])
    gap = float(np.max(np.linalg.norm(proj - ys[:n], axis=1)))
    # a run that stopped earlier has sat at its fixed point ever since
    if len(xs) > n:
        tail = np.array([L.project(x).selected for x in xs[n:]])
        gap = max(gap, float(np.max(np.linalg.norm(tail - ys[-1], axis=1))))
    return gap


@dataclass(frozen=True, eq=False)
class ShadowLimit:
    xbar: np.ndarray
    pA: np.ndarray
    pB: np.ndarray
    formula_value: np.ndarray
    agree: bool
    in_intersection: bool

    def to_dict(self) -> dict:
        return {
            "xbar": self.xbar.tolist(),
            "pA": self.pA.tolist(),
            "pB": self.pB.tolist(),
            "formula_value": self.formula_value.tolist(),
            "agree": self.agree,
            "in_intersection": self.in_intersection,
        }


def shadow_limit_formula(traj: Trajectory, L: AffineSubspace, A: ClosedSet, B: ClosedSet,
                         agree_tol: Optional[float] = None) -> ShadowLimit:
    """Compare ``P_A xbar``, ``P_B xbar`` and ``xbar - (x_0 - P_L x_0)``.

    Disagreement is reported, not raised: without affine-hull regularity the
    two shadows of a fixed point can legitimately differ.
    """
    if not traj.converged:
        raise ValueError("trajectory did not stop on the residual tolerance")
    xbar = traj.limit_estimate
    x0 = traj.x0
    pA = A.project(xbar).selected
    pB = B.project(xbar).selected
    formula = xbar - (x0 - L.project(x0).selected)
    tol = 10.0 * traj.tol if agree_tol is None else agree_tol
    agree = max(np.linalg.norm(pA - pB), np.linalg.norm(pA - formula), np.linalg.norm(pB - formula)) <= tol
    inside = A.contains(pA, 1e-9) and B.contains(pA, 1e-9)
    return ShadowLimit(xbar, pA, pB, formula, bool(agree), bool(inside))
