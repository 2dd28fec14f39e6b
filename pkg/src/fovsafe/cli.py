"""Command-line entry points.

Exit codes: 0 success, 1 configuration error, 2 detection lost during a run,
3 verifier found violations.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from .robust import ErrorBounds, fov_containment_check, robust_camera, verify_theta_bounds
from .sim import (
    ConfigError,
    adversarial_scenario,
    default_scenario,
    load_scenario,
    randomized_scenario,
    run_scenario,
    save_scenario,
    write_trace_csv,
    write_trace_jsonl,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DETECTION_LOST = 2
EXIT_VIOLATIONS = 3

_ROBUST_ALIASES = {"off": "off", "frame": "frame_shift_only", "full": "full_theta"}


def _load_or_build(args):
    if getattr(args, "config", None):
        cfg = load_scenario(args.config)
    elif getattr(args, "adversarial", False):
        cfg = adversarial_scenario()
    else:
        cfg = randomized_scenario(getattr(args, "seed", 0) or 0)
    if getattr(args, "robust", None):
        cfg = replace(cfg, robust_mode=_ROBUST_ALIASES[args.robust])
    if getattr(args, "disable_cbf", False):
        cfg = replace(cfg, cbf_enabled=False)
    return cfg


def _emit_report(report: dict, as_json: bool) -> None:
    if as_json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        for key, value in report.items():
            print(f"{key}: {value}")


def cmd_run(args) -> int:
    try:
        cfg = _load_or_build(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    result = run_scenario(cfg)
    if args.trace:
        if args.format == "jsonl":
            write_trace_jsonl(result.records, args.trace)
        else:
            write_trace_csv(result.records, args.trace)
    if args.save_scenario:
        save_scenario(cfg, args.save_scenario)
    summary = {
        "status": result.status,
        "steps": len(result.records),
        "min_true_barrier": float(min((r.h_min for r in result.records), default=np.nan)),
        "min_true_hz": float(min((r.h_z for r in result.records), default=np.nan)),
        "final_error_norm": float(np.linalg.norm(result.final_error)),
        "seed": cfg.seed,
    }
    if result.status == "detection_lost":
        summary["detection_lost_time"] = result.detection_lost_time
    _emit_report(summary, args.json)
    if result.status == "detection_lost":
        print(
            f"detection lost at t = {result.detection_lost_time:.3f} s "
            f"({len(result.records)} steps recorded)",
            file=sys.stderr,
        )
        return EXIT_DETECTION_LOST
    return EXIT_OK


def cmd_verify_containment(args) -> int:
    bounds = ErrorBounds(args.delta, args.epsilon)
    camera = (load_scenario(args.config) if args.config else default_scenario()).camera
    checks = {}
    failed = False

    def run_check(name: str, check_bounds: ErrorBounds, robust: bool, expect_clean: bool):
        nonlocal failed
        if robust:
            rob = robust_camera(camera, check_bounds)
            inner, shift = rob.tightened, rob.shift
        else:
            inner, shift = camera, np.zeros(3)
        report = fov_containment_check(
            camera, inner, shift, check_bounds,
            n_frames=args.samples, n_points=args.points, seed=args.seed,
        )
        checks[name] = report.as_dict()
        if (report.violations == 0) != expect_clean:
            failed = True

    run_check("rotation_only", ErrorBounds(0.0, bounds.epsilon), robust=True, expect_clean=True)
    run_check("translation_only", ErrorBounds(bounds.delta, 0.0), robust=True, expect_clean=True)
    run_check("combined", bounds, robust=True, expect_clean=True)
    run_check("non_robust_control", bounds, robust=False, expect_clean=False)

    if args.json:
        print(json.dumps(checks, indent=2, sort_keys=True))
    else:
        for name, rep in checks.items():
            print(
                f"{name}: violations={rep['violations']} samples={rep['samples']} "
                f"worst_margin={rep['worst_margin']:.6g} seed={rep['seed']}"
            )
    return EXIT_VIOLATIONS if failed else EXIT_OK


def cmd_verify_bounds(args) -> int:
    camera = (load_scenario(args.config) if args.config else default_scenario()).camera
    report, max_gap = verify_theta_bounds(
        camera,
        ErrorBounds(args.delta, args.epsilon),
        gain=args.gain,
        n_draws=args.samples,
        seed=args.seed,
    )
    out = report.as_dict()
    out["max_gap"] = max_gap
    _emit_report(out, args.json)
    return EXIT_VIOLATIONS if report.violations else EXIT_OK


def cmd_verify_invariance(args) -> int:
    violations = 0
    worst = float("inf")
    failing = []
    for k in range(args.samples):
        seed = args.seed + k
        try:
            cfg = randomized_scenario(seed)
        except ConfigError as exc:
            print(f"configuration error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        result = run_scenario(cfg)
        h_min = float(min(min(r.h_min for r in result.records), min(r.h_z for r in result.records)))
        worst = min(worst, h_min)
        if result.status != "completed" or h_min < -1e-9:
            violations += 1
            failing.append(seed)
    report = {
        "violations": violations,
        "samples": args.samples,
        "worst_margin": worst if np.isfinite(worst) else None,
        "seed": args.seed,
    }
    if failing:
        report["failing_seeds"] = failing
    _emit_report(report, args.json)
    return EXIT_VIOLATIONS if violations else EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .teleop import create_app

    try:
        cfg = _load_or_build(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    app = create_app(cfg, rate_hz=args.rate)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fovsafe",
        description="Visibility-safe visual servoing: simulation, verification, teleoperation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_scenario_args(p):
        p.add_argument("--config", help="scenario JSON file (default: generated from --seed)")
        p.add_argument("--seed", type=int, default=0, help="seed for a generated scenario (default 0)")
        p.add_argument(
            "--robust",
            choices=sorted(_ROBUST_ALIASES),
            help="override robustification mode: off | frame (frame shift only) | full",
        )
        p.add_argument("--adversarial", action="store_true", help="use the border-dragging scenario")
        p.add_argument("--disable-cbf", action="store_true", help="turn off the safety filter")
        p.add_argument("--json", action="store_true", help="emit machine-readable JSON reports")

    p_run = sub.add_parser("run", help="integrate a scenario and summarize the trace")
    add_scenario_args(p_run)
    p_run.add_argument("--trace", help="trace output path")
    p_run.add_argument("--format", choices=["csv", "jsonl"], default="csv",
                       help="trace format (default csv)")
    p_run.add_argument("--save-scenario", help="write the resolved scenario JSON")
    p_run.set_defaults(func=cmd_run)

    p_cont = sub.add_parser(
        "verify-containment",
        help="sample perturbed frames to check the tightened FOV stays inside the physical one",
    )
    p_cont.add_argument("--samples", type=int, default=10000,
                        help="number of perturbed frames (default 10000)")
    p_cont.add_argument("--points", type=int, default=1000,
                        help="FOV sample points per frame (default 1000)")
    p_cont.add_argument("--delta", type=float, default=0.02,
                        help="translation error bound in meters (default 0.02)")
    p_cont.add_argument("--epsilon", type=float, default=float(np.deg2rad(5.0)),
                        help="rotation error bound in radians (default 5 degrees)")
    p_cont.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p_cont.add_argument("--config", help="take the camera from this scenario JSON")
    p_cont.add_argument("--json", action="store_true", help="emit machine-readable JSON reports")
    p_cont.set_defaults(func=cmd_verify_containment)

    p_bounds = sub.add_parser(
        "verify-bounds",
        help="sample admissible errors to check the conservative rows under-estimate the true ones",
    )
    p_bounds.add_argument("--samples", type=int, default=100000,
                          help="number of random draws (default 100000)")
    p_bounds.add_argument("--delta", type=float, default=0.02,
                          help="translation error bound in meters (default 0.02)")
    p_bounds.add_argument("--epsilon", type=float, default=float(np.deg2rad(5.0)),
                          help="rotation error bound in radians (default 5 degrees)")
    p_bounds.add_argument("--gain", type=float, default=2.0,
                          help="barrier gain used in the rows (default 2.0)")
    p_bounds.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p_bounds.add_argument("--config", help="take the camera from this scenario JSON")
    p_bounds.add_argument("--json", action="store_true", help="emit machine-readable JSON reports")
    p_bounds.set_defaults(func=cmd_verify_bounds)

    p_inv = sub.add_parser(
        "verify-invariance",
        help="run seeded closed-loop scenarios and check the physical barriers never go negative",
    )
    p_inv.add_argument("--samples", type=int, default=20,
                       help="number of seeded scenarios (default 20)")
    p_inv.add_argument("--seed", type=int, default=0, help="first scenario seed (default 0)")
    p_inv.add_argument("--json", action="store_true", help="emit machine-readable JSON reports")
    p_inv.set_defaults(func=cmd_verify_invariance)

    p_serve = sub.add_parser("serve", help="start the teleoperation websocket service")
    add_scenario_args(p_serve)
    p_serve.add_argument("--host", default="127.0.0.1", help="bind address (default 127.0.0.1)")
    p_serve.add_argument("--port", type=int, default=8000, help="port (default 8000)")
    p_serve.add_argument("--rate", type=float, default=50.0, help="control rate in Hz (default 50)")
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
