"""Empirical R-linear rates of DR trajectories and checks of explicit bounds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dr_core import Trajectory

ERROR_FLOOR = 1e-13
MIN_POINTS = 5


class TooFewPoints(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RateFit:
    """Fit of ``||x_n - xbar|| <= C kappa^n``.

    ``finite_termination`` marks sequences that hit the limit exactly after a
    few steps; their fit uses every pre-termination error even when fewer than
    ``MIN_POINTS`` exist.
    """

    kappa_emp: float
    C_emp: float
    tail_start: int
    r_squared: float
    limit_used: np.ndarray
    n_points: int
    finite_termination: bool = False

    def to_dict(self) -> dict:
        return {
            "kappa_emp": self.kappa_emp,
            "C_emp": self.C_emp,
            "r_squared": self.r_squared,
            "tail_start": self.tail_start,
            "n_points": self.n_points,
            "finite_termination": self.finite_termination,
        }


def fit_errors(errors, tail_fraction: float = 0.5, limit=None, floor: float = ERROR_FLOOR,
               min_points: int = MIN_POINTS) -> RateFit:
    """Log-linear least squares on an error sequence ``e_n``.

    Only errors above ``floor`` enter the regression; of those, the last
    ``tail_fraction`` are used.  ``C_emp`` is then raised so that
    ``e_n <= C_emp * kappa_emp**n`` holds for every positive ``e_n``.
    """
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must be in (0, 1]")
    e = np.asarray(errors, dtype=float)
    idx = np.flatnonzero(e > floor)
    finite = False
    if len(idx) < min_points:
        # the sequence reached its limit exactly: every later error is roundoff
        finite = (len(idx) >= 2 and len(e) > len(idx) and idx[-1] == len(idx) - 1
                  and np.all(e[len(idx):] <= floor))
        if not finite:
            raise TooFewPoints(f"{len(idx)} usable errors, need {min_points}")
        used = idx
    else:
        k = max(min_points, int(np.ceil(tail_fraction * len(idx))))
        used = idx[-min(k, len(idx)):]
    n = used.astype(float)
    logs = np.log(e[used])
    slope, intercept = np.polyfit(n, logs, 1)
    pred = slope * n + intercept
    ss_res = float(np.sum((logs - pred) ** 2))
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    kappa = float(np.exp(slope))
    pos = np.flatnonzero(e > 0)
    C = float(np.exp(intercept))
    if len(pos):
        C = max(C, float(np.max(e[pos] / kappa ** pos.astype(float))))
    lim = None if limit is None else np.asarray(limit, dtype=float)
    return RateFit(kappa, C, int(used[0]), float(np.clip(r2, 0.0, 1.0)), lim, len(used), bool(finite))


def trajectory_errors(traj: Trajectory, limit=None) -> np.ndarray:
    xbar = traj.limit_estimate if limit is None else np.asarray(limit, dtype=float)
    return np.linalg.norm(traj.iterates - xbar, axis=1)


def fit_rlinear(traj: Trajectory, tail_fraction: float = 0.5, **kwargs) -> RateFit:
    """R-linear fit of ``||x_n - xbar||`` with ``xbar`` the trajectory's limit estimate."""
    if not traj.converged:
        raise ValueError("trajectory did not converge")
    return fit_errors(trajectory_errors(traj), tail_fraction, traj.limit_estimate, **kwargs)


@dataclass(frozen=True)
class BoundCheck:
    passed: bool
    max_ratio: float

    def __bool__(self):
        return self.passed


def verify_prop210_bound(traj: Trajectory, w, kappa: float, limit=None, slack: float = 1e-9) -> BoundCheck:
    """Check ``||x_n - xbar|| <= ||x_0 - w|| (1 + kappa) / (1 - kappa) * kappa^n`` for every n.

    ``max_ratio`` is the largest ``e_n / bound_n``.
    """
    if not 0.0 <= kappa < 1.0:
        raise ValueError("kappa must be in [0, 1)")
    if limit is None and not traj.converged:
        raise ValueError("trajectory did not converge")
    e = trajectory_errors(traj, limit)
    M = float(np.linalg.norm(traj.x0 - np.asarray(w, dtype=float)))
    n = np.arange(len(e), dtype=float)
    bound = M * (1.0 + kappa) / (1.0 - kappa) * kappa ** n
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0, e / bound, np.where(e > 0, np.inf, 0.0))
    return BoundCheck(bool(np.all(e <= bound + slack)), float(np.max(ratio)))


def per_step_contraction(traj: Trajectory, intersection_oracle, floor: float = 1e-12) -> list[float]:
    """Ratios ``||x_{n+1} - P x_n|| / d(x_n)`` with ``P`` the oracle's nearest intersection point."""
    ratios = []
    for s in traj.steps:
        xbar = intersection_oracle.nearest(s.x)
        den = float(np.linalg.norm(s.x - xbar))
        if den > floor:
            ratios.append(float(np.linalg.norm(s.x_next - xbar)) / den)
    return ratios


def rate_report(fit: RateFit | None, kappa_certified: float | None, check: BoundCheck | None) -> dict:
    return {
        "kappa_emp": None if fit is None else fit.kappa_emp,
        "C_emp": None if fit is None else fit.C_emp,
        "r_squared": None if fit is None else fit.r_squared,
        "kappa_certified": kappa_certified,
        "bound_satisfied": None if check is None else check.passed,
        "max_ratio": None if check is None else check.max_ratio,
    }
