"""Named scenarios and the full run -> reduce -> diagnose -> fit pipeline."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .affine_reduction import affine_hull_union, reduce_trajectory, reduced_run_deviation, shadow_limit_formula
from .dr_core import Trajectory, fixed_point_residual, run
from .intersections import EmptyIntersection, FinitePoints, IntersectionOracle, intersection_oracle
from .rate_analysis import TooFewPoints, fit_rlinear, per_step_contraction, rate_report, verify_prop210_bound
from .regularity import RateBound, RateVariant, diagnose, kappa_bound
from .sets import AffineSubspace, ClosedSet, HalfSpace, ParabolaHypograph, Slab, Sphere, as_vector, set_from_dict

log = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
STRIPS_MU = 2.0 / math.sqrt(2.0 - SQRT2)
STRIPS_KAPPA_SQ = (17.0 + 2.0 * SQRT2) / 20.0


@dataclass(eq=False)
class Scenario:
    name: str
    A: ClosedSet
    B: ClosedSet
    x0: np.ndarray
    w_hint: Optional[np.ndarray] = None
    expected: dict = field(default_factory=dict)
    intersection_points: Optional[np.ndarray] = None
    description: str = ""

    def __post_init__(self):
        if self.A.dim != self.B.dim:
            raise ValueError("A and B live in different dimensions")
        self.x0 = as_vector(self.x0, self.A.dim)
        if self.w_hint is not None:
            self.w_hint = as_vector(self.w_hint, self.A.dim)
            if not (self.A.contains(self.w_hint, 1e-9) and self.B.contains(self.w_hint, 1e-9)):
                raise ValueError(f"{self.name}: w_hint is not in both sets")

    def oracle(self) -> IntersectionOracle:
        if self.intersection_points is not None:
            return FinitePoints(self.intersection_points)
        return intersection_oracle(self.A, self.B)

    def with_x0(self, x0) -> "Scenario":
        return Scenario(self.name, self.A, self.B, x0, self.w_hint, self.expected,
                        self.intersection_points, self.description)

    def to_dict(self) -> dict:
        out = {"name": self.name, "A": self.A.to_dict(), "B": self.B.to_dict(), "x0": self.x0.tolist()}
        if self.w_hint is not None:
            out["w_hint"] = self.w_hint.tolist()
        if self.expected:
            out["expected"] = self.expected
        if self.intersection_points is not None:
            out["intersection_points"] = np.asarray(self.intersection_points).tolist()
        return out


def scenario_from_dict(data: dict[str, Any], name: Optional[str] = None) -> Scenario:
    """Build a scenario from a config object ``{"A": ..., "B": ..., "x0": [...], "w_hint": [...]}``."""
    try:
        A, B = set_from_dict(data["A"]), set_from_dict(data["B"])
        x0 = data["x0"]
    except KeyError as exc:
        raise ValueError(f"config is missing {exc}") from None
    pts = data.get("intersection_points")
    return Scenario(
        name=name or data.get("name", "config"),
        A=A,
        B=B,
        x0=x0,
        w_hint=data.get("w_hint"),
        expected=data.get("expected", {}),
        intersection_points=None if pts is None else np.asarray(pts, dtype=float),
        description=data.get("description", ""),
    )


def builtin_scenarios() -> list[Scenario]:
    w_circ = np.array([0.5, math.sqrt(3.0) / 2.0])
    return [
        Scenario(
            "two-circles",
            Sphere([0.0, 0.0], 1.0),
            Sphere([1.0, 0.0], 1.0),
            x0=w_circ + np.array([0.01, 0.02]),
            w_hint=w_circ,
            expected={"limit": w_circ.tolist(), "limit_tol": 1e-8, "max_iters": 200},
            description="two unit circles meeting transversally",
        ),
        Scenario(
            "two-lines-r3",
            AffineSubspace([0.0, 0.0, 0.0], [[1.0, 0.0, 0.0]]),
            AffineSubspace([0.0, 0.0, 0.0], [[0.0, 1.0, 0.0]]),
            x0=[1.0, 1.0, 1.0],
            w_hint=[0.0, 0.0, 0.0],
            expected={"shadow_agree": True, "in_intersection": True, "theta_bar": 1.0,
                      "restricted_theta": 0.0, "offset_tol": 1e-8},
            description="x- and y-axis of R^3: affine-hull regular, not strongly regular",
        ),
        Scenario(
            "two-strips",
            Slab([0.0, 1.0], 0.0, 1.0),
            Slab([-1.0 / SQRT2, 1.0 / SQRT2], 0.0, 1.0 / SQRT2),
            x0=[0.0, 5.0],
            w_hint=[0.0, 0.0],
            expected={
                "rate_inputs": {"eps_A": 0.0, "eps_B": 0.0, "theta": SQRT2 / 2.0, "mu": STRIPS_MU,
                                "variant": "General"},
                "kappa_sq": STRIPS_KAPPA_SQ,
                "kappa_emp_slack": 0.005,
                "apriori_bound": True,
                "shadow_agree": True,
                "in_intersection": True,
            },
            description="0 <= x2 <= 1 and 0 <= x2 - x1 <= 1 (second slab stored with unit normal)",
        ),
        Scenario(
            "parabola-halfplane",
            HalfSpace([0.0, -1.0], 0.0),
            ParabolaHypograph(1.0),
            x0=[0.0, -1.0],
            w_hint=[0.0, 0.0],
            expected={"fixed_point": [0.0, -1.0], "fixed_point_tol": 1e-12, "iters": 1,
                      "shadow_agree": False, "pA": [0.0, 0.0], "pB": [0.0, -1.0]},
            intersection_points=np.array([[0.0, 0.0]]),
            description="R x R_+ against x2 <= -x1^2: a fixed point whose shadows differ",
        ),
        Scenario(
            "circle-line",
            AffineSubspace([0.0, 0.5], [[1.0, 0.0]]),
            Sphere([0.0, 0.0], 1.0),
            x0=[0.3, 2.0],
            w_hint=[math.sqrt(3.0) / 2.0, 0.5],
            expected={"limit_in_intersection": True, "shadow_agree": True},
            description="horizontal secant line x2 = 1/2 and the unit circle",
        ),
    ]


def get_scenario(name: str) -> Scenario:
    for s in builtin_scenarios():
        if s.name == name:
            return s
    raise KeyError(f"unknown scenario {name!r}")


@dataclass
class PipelineOptions:
    max_iters: int = 100_000
    tol: float = 1e-12
    seed: int = 42
    count: int = 2000
    delta: float = 0.1
    tail_fraction: float = 0.5
    diagnostics: bool = True


@dataclass(eq=False)
class PipelineResult:
    scenario: Scenario
    trajectory: Trajectory
    report: dict

    @property
    def passed(self) -> bool:
        return self.report["passed"]

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.report), indent=2, sort_keys=True)

    def write(self, out_dir) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{self.scenario.name}.trajectory.csv"
        json_path = out / f"{self.scenario.name}.report.json"
        self.trajectory.write_csv(csv_path)
        json_path.write_text(self.to_json() + "\n")
        return csv_path, json_path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _certified_bound(s: Scenario, diag) -> Optional[RateBound]:
    inputs = s.expected.get("rate_inputs")
    if inputs:
        inputs = dict(inputs)
        variant = RateVariant(inputs.pop("variant", "General"))
        return kappa_bound(variant=variant, **inputs)
    if diag is None:
        return None
    feasible = [b for b in (diag.kappa_general, diag.kappa_affineA) if b is not None and b.feasible]
    return min(feasible, key=lambda b: b.kappa_sq) if feasible else None


def _close(v, target, tol) -> bool:
    return v is not None and float(np.linalg.norm(np.asarray(v) - np.asarray(target))) <= tol


def _expectations(s: Scenario, ctx: dict) -> list[dict]:
    exp = s.expected
    traj: Trajectory = ctx["trajectory"]
    shadow = ctx.get("shadow")
    checks = []

    def add(name, ok, detail):
        checks.append({"name": name, "passed": bool(ok), "detail": detail})

    limit = None if traj.limit_estimate is None else traj.limit_estimate
    if "limit" in exp:
        add("limit", _close(limit, exp["limit"], exp.get("limit_tol", 1e-8)),
            None if limit is None else limit.tolist())
    if "max_iters" in exp:
        add("max_iters", traj.converged and len(traj.steps) <= exp["max_iters"], len(traj.steps))
    if "iters" in exp:
        add("iters", len(traj.steps) == exp["iters"], len(traj.steps))
    if "fixed_point" in exp:
        tol = exp.get("fixed_point_tol", 1e-12)
        fpr = ctx.get("fixed_point_residual")
        add("fixed_point", _close(limit, exp["fixed_point"], tol) and fpr is not None and fpr <= tol, fpr)
    for key in ("pA", "pB"):
        if key in exp:
            val = None if shadow is None else getattr(shadow, key)
            add(key, _close(val, exp[key], 1e-12), None if val is None else val.tolist())
    if "shadow_agree" in exp:
        add("shadow_agree", shadow is not None and shadow.agree == exp["shadow_agree"],
            None if shadow is None else shadow.agree)
    if "in_intersection" in exp:
        add("in_intersection", shadow is not None and shadow.in_intersection == exp["in_intersection"],
            None if shadow is None else shadow.in_intersection)
    if "limit_in_intersection" in exp:
        ok = limit is not None and s.A.contains(limit, 1e-8) and s.B.contains(limit, 1e-8)
        add("limit_in_intersection", ok == exp["limit_in_intersection"], ok)
    bound = ctx.get("certified")
    if "kappa_sq" in exp:
        add("kappa_sq", bound is not None and abs(bound.kappa_sq - exp["kappa_sq"]) <= 1e-12,
            None if bound is None else bound.kappa_sq)
    if "kappa_emp_slack" in exp:
        fit = ctx.get("fit")
        ok = fit is not None and bound is not None and bound.feasible and \
            fit.kappa_emp <= bound.kappa + exp["kappa_emp_slack"]
        add("kappa_emp", ok, None if fit is None else fit.kappa_emp)
    if "apriori_bound" in exp:
        chk = ctx.get("apriori_bound")
        add("apriori_bound", chk is not None and chk.passed == exp["apriori_bound"],
            None if chk is None else chk.max_ratio)
    diag = ctx.get("diagnostics")
    for key in ("theta_bar", "restricted_theta"):
        if key in exp:
            val = None if diag is None else getattr(diag, key)
            add(key, val is not None and abs(val - exp[key]) <= 1e-12, val)
    if "offset_tol" in exp:
        red = ctx.get("reduction")
        add("offset", red is not None and red.max_offset_deviation <= exp["offset_tol"],
            None if red is None else red.max_offset_deviation)
    return checks


def run_pipeline(s: Scenario, opts: Optional[PipelineOptions] = None) -> PipelineResult:
    """Run DR on the scenario and every downstream analysis, returning the full report."""
    opts = opts or PipelineOptions()
    if opts.max_iters < 1 or not opts.tol > 0:
        raise ValueError("need max_iters >= 1 and tol > 0")
    A, B = s.A, s.B
    traj = run(A, B, s.x0, opts.max_iters, opts.tol)
    ctx: dict[str, Any] = {"trajectory": traj}
    report: dict[str, Any] = {"scenario": s.name, "trajectory": traj.summary(), "notes": []}

    hull = affine_hull_union(A, B)
    red = reduce_trajectory(traj, hull.L, A, B)
    ctx["reduction"] = red
    report["reduction"] = red.report()
    report["reduction"]["reduced_run_deviation"] = reduced_run_deviation(traj, hull.L, A, B)

    if traj.converged:
        shadow = shadow_limit_formula(traj, hull.L, A, B)
        ctx["shadow"] = shadow
        report["shadow"] = shadow.to_dict()
        fpr = fixed_point_residual(A, B, traj.limit_estimate)
        ctx["fixed_point_residual"] = fpr
        report["fixed_point_residual"] = fpr

    try:
        oracle = s.oracle()
    except (EmptyIntersection, ValueError) as exc:
        oracle = None
        report["notes"].append(f"no intersection oracle: {exc}")

    diag = None
    if opts.diagnostics and s.w_hint is not None and oracle is not None:
        diag = diagnose(A, B, s.w_hint, hull.L, oracle, opts.delta, opts.count, opts.seed)
        report["diagnostics"] = diag.to_dict()
    ctx["diagnostics"] = diag

    bound = _certified_bound(s, diag)
    ctx["certified"] = bound
    report["kappa_certified"] = None if bound is None else bound.to_dict()

    fit = check = None
    if traj.converged:
        try:
            fit = fit_rlinear(traj, opts.tail_fraction)
            report["fit"] = fit.to_dict()
        except TooFewPoints as exc:
            report["notes"].append(f"rate fit skipped: {exc}")
        if bound is not None and bound.feasible and s.w_hint is not None:
            check = verify_prop210_bound(traj, s.w_hint, bound.kappa)
    ctx["fit"], ctx["apriori_bound"] = fit, check
    report["rate"] = rate_report(fit, None if bound is None else bound.kappa, check)

    if oracle is not None:
        ratios = per_step_contraction(traj, oracle)
        report["per_step_max"] = max(ratios) if ratios else None

    checks = _expectations(s, ctx)
    report["expectations"] = checks
    report["passed"] = all(c["passed"] for c in checks)
    return PipelineResult(s, traj, _jsonable(report))


def run_many(scenarios: list[Scenario], opts: Optional[PipelineOptions] = None, jobs: int = 1) -> list[PipelineResult]:
    if jobs <= 1:
        return [run_pipeline(s, opts) for s in scenarios]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda s: run_pipeline(s, opts), scenarios))
