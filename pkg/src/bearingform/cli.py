"""Command-line front end: analyze, target, simulate, verify."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .control_local import SyncAssumption, check_sync_assumption
from .distance import distance_rigidity_report
from .errors import BearingFormError, CollisionError, NumericError, ValidationError
from .formats import _json_safe, parse_spec, read_trace, write_trace
from .rigidity import RANK_TOL, Framework, rigidity_report
from .sim import SimConfig, compute_metrics, integrate, random_positions, random_rotations
from .target import compute_target

log = logging.getLogger("bearingform")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_COLLISION = 0, 1, 2, 3


def _emit(obj) -> None:
    json.dump(_json_safe(obj), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def cmd_analyze(args) -> int:
    spec = parse_spec(args.spec)
    f = Framework(spec.graph, spec.require_positions())
    _emit({
        "bearing": rigidity_report(f, tol=args.tol_rank).to_dict(),
        "distance": distance_rigidity_report(f, tol=args.tol_rank).to_dict(),
    })
    return EXIT_OK


def cmd_target(args) -> int:
    spec = parse_spec(args.spec)
    sol = compute_target(spec.require_constraints(), spec.require_positions(), tol=args.tol_rank)
    _emit(sol.to_dict())
    return EXIT_OK


def _initial_state(spec, mode: str, rng: np.random.Generator, max_angle: float, use_spec: bool):
    if use_spec and spec.positions is not None:
        p0 = spec.positions
    else:
        p0 = random_positions(rng, spec.n, spec.d)
    Q0 = None
    if mode == "local":
        if use_spec and spec.orientations is not None:
            Q0 = spec.orientations
        else:
            Q0 = random_rotations(rng, spec.n, max_angle)
    return p0, Q0


def _run_one(spec, cfg: SimConfig, rng, max_angle: float, use_spec: bool, out: Path | None):
    p0, Q0 = _initial_state(spec, cfg.mode, rng, max_angle, use_spec)
    assumption = None
    if Q0 is not None:
        assumption = check_sync_assumption(Q0)
        if assumption is not SyncAssumption.SATISFIED:
            log.warning("initial orientations: synchronisation assumption %s", assumption.value)
    trace = integrate(p0, spec.require_constraints(), cfg, Q0=Q0)
    summary = compute_metrics(trace)
    if assumption is not None:
        summary["sync_assumption"] = assumption.value
    if out is not None:
        summary["metrics_file"] = str(write_trace(trace, out, summary))
        summary["trace_file"] = str(out)
    return trace, summary


def cmd_simulate(args) -> int:
    spec = parse_spec(args.spec)
    spec.require_constraints()
    cfg = SimConfig(dt=args.dt, t_end=args.t_end, mode=args.mode, seed=args.seed, gamma=args.gamma,
                    record_every=args.record_every, rank_tol=args.tol_rank)
    max_angle = np.deg2rad(args.max_angle)
    out = Path(args.out) if args.out else None
    if args.batch is None:
        rng = np.random.default_rng(cfg.seed)
        trace, summary = _run_one(spec, cfg, rng, max_angle, True, out)
        _emit(summary)
        return EXIT_COLLISION if trace.events else EXIT_OK
    if args.batch < 1:
        raise ValidationError("--batch needs a positive run count")
    if spec.positions is not None or spec.orientations is not None:
        log.warning("--batch draws every initial state from the seed; spec positions/orientations are ignored")
    summaries, collided = [], False
    for b in range(args.batch):
        rng = np.random.default_rng([cfg.seed, b])
        run_out = None if out is None else out.with_name(f"{out.stem}_{b:03d}{out.suffix}")
        trace, summary = _run_one(spec, cfg, rng, max_angle, False, run_out)
        summary["run"] = b
        summaries.append(summary)
        collided |= bool(trace.events)
    _emit({"runs": summaries, "passed": all(s["passed"] for s in summaries)})
    return EXIT_COLLISION if collided else EXIT_OK


def cmd_verify(args) -> int:
    spec = parse_spec(args.spec)
    trace = read_trace(args.trace, spec)
    tol = {}
    if args.tol is not None:
        tol = {"centroid_drift": args.tol, "scale_drift": args.tol, "sphere_error": args.tol}
    summary = compute_metrics(trace, tol)
    _emit({"invariants": summary["invariants"], "invariants_hold": summary["invariants_hold"],
           "convergence": summary["convergence"], "samples": summary["samples"]})
    if not summary["invariants_hold"]:
        failed = sorted(k for k, v in summary["invariants"].items() if not v)
        raise ValidationError(f"trace violates invariants: {', '.join(failed)}")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    """Usage errors follow the same one-line JSON convention as every other failure."""

    def error(self, message):
        sys.stderr.write(json.dumps({"error": "usage", "message": message}) + "\n")
        sys.exit(EXIT_VALIDATION)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bearingform", description="Bearing rigidity analysis and formation control.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("spec", help="formation spec (JSON)")
        p.add_argument("--tol-rank", type=float, default=RANK_TOL, help="relative singular-value cutoff for ranks")

    p = sub.add_parser("analyze", help="bearing and distance rigidity reports")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("target", help="target formation for the spec file's bearings and positions")
    common(p)
    p.set_defaults(func=cmd_target)

    p = sub.add_parser("simulate", help="integrate the closed loop and write a CSV trace")
    common(p)
    p.add_argument("--mode", choices=("global", "local"), default="global")
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--t-end", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gamma", type=float, default=None, help="stop when any two agents get closer than this")
    p.add_argument("--record-every", type=int, default=1, help="keep every k-th step")
    p.add_argument("--max-angle", type=float, default=30.0,
                   help="degrees; random orientations are drawn within this angle of the identity")
    p.add_argument("--batch", type=int, default=None, help="run k seeded random starts")
    p.add_argument("--out", default=None, help="CSV trace path (metrics go to <stem>.metrics.json)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="re-check the invariants of a saved trace")
    common(p)
    p.add_argument("--trace", required=True)
    p.add_argument("--tol", type=float, default=None, help="drift tolerance for centroid, scale and sphere checks")
    p.set_defaults(func=cmd_verify)
    return parser


def _fail(kind: str, exc: Exception, code: int) -> int:
    err = {"error": kind, "message": str(exc)}
    loc = getattr(exc, "location", None)
    if loc is not None:
        err["location"] = loc
    step = getattr(exc, "step", None)
    if step is not None:
        err["step"] = step
    sys.stderr.write(json.dumps(err) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericError as exc:
        return _fail("numeric", exc, EXIT_NUMERIC)
    except CollisionError as exc:
        return _fail("collision", exc, EXIT_COLLISION)
    except BearingFormError as exc:
        return _fail(type(exc).__name__, exc, EXIT_VALIDATION)
    except OSError as exc:
        return _fail("io", exc, EXIT_VALIDATION)


if __name__ == "__main__":
    sys.exit(main())
