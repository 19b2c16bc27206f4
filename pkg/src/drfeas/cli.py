"""Command line entry point: ``drfeas run | diagnose | list``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .harness import (PipelineOptions, builtin_scenarios, get_scenario, run_many,
                      scenario_from_dict, _jsonable)
from .affine_reduction import affine_hull_union
from .regularity import diagnose

EXIT_OK, EXIT_EXPECTATION, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _parse_vector(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"bad vector {text!r}") from None


def _load_scenarios(args) -> list:
    try:
        if args.config:
            data = json.loads(Path(args.config).read_text())
            scenarios = [scenario_from_dict(data, name=Path(args.config).stem if "name" not in data else None)]
        else:
            scenarios = [get_scenario(n) for n in args.scenario]
        if getattr(args, "x0", None):
            x0 = _parse_vector(args.x0)
            scenarios = [s.with_x0(x0) for s in scenarios]
    except (OSError, json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    return scenarios


def _add_source(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--scenario", action="append", help="built-in scenario name (repeatable)")
    g.add_argument("--config", help="JSON file with A, B, x0 and optional w_hint")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drfeas", description="Douglas-Rachford feasibility experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the full pipeline on scenarios")
    _add_source(p)
    p.add_argument("--x0", help="comma separated starting point")
    p.add_argument("--max-iters", type=int, default=100_000)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--count", type=int, default=2000)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--out-dir", default="out")
    p.add_argument("--jobs", type=int, default=1, help="scenarios run concurrently")

    p = sub.add_parser("diagnose", help="regularity diagnostics only")
    _add_source(p)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--count", type=int, default=2000)
    p.add_argument("--seed", type=int, default=42)

    sub.add_parser("list", help="list built-in scenarios")
    return parser


def cmd_list(args) -> int:
    for s in builtin_scenarios():
        print(f"{s.name}\t{s.description}")
    return EXIT_OK


def cmd_run(args) -> int:
    if args.max_iters < 1 or not args.tol > 0 or args.jobs < 1:
        raise UsageError("need --max-iters >= 1, --tol > 0 and --jobs >= 1")
    scenarios = _load_scenarios(args)
    opts = PipelineOptions(max_iters=args.max_iters, tol=args.tol, seed=args.seed,
                           count=args.count, delta=args.delta)
    results = run_many(scenarios, opts, args.jobs)
    ok = True
    for r in results:
        r.write(args.out_dir)
        t = r.report["trajectory"]
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.scenario.name}: {t['stop_reason']} after {t['iters']} iterations, "
              f"residual {t['final_residual']:.3e}")
        for c in r.report["expectations"]:
            if not c["passed"]:
                print(f"    expectation {c['name']} failed: {c['detail']}")
        ok &= r.passed
    return EXIT_OK if ok else EXIT_EXPECTATION


def cmd_diagnose(args) -> int:
    if not args.delta > 0 or args.count < 1:
        raise UsageError("need --delta > 0 and --count >= 1")
    out = {}
    for s in _load_scenarios(args):
        if s.w_hint is None:
            raise UsageError(f"{s.name}: diagnostics need w_hint")
        L = affine_hull_union(s.A, s.B).L
        out[s.name] = diagnose(s.A, s.B, s.w_hint, L, s.oracle(), args.delta, args.count, args.seed).to_dict()
    print(json.dumps(_jsonable(out), indent=2, sort_keys=True))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    handler = {"list": cmd_list, "run": cmd_run, "diagnose": cmd_diagnose}[args.command]
    try:
        return handler(args)
    except UsageError as exc:
        print(f"drfeas: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
