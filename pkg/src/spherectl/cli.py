"""Command-line entry point: ``spherectl <simulate|equilibria|check|attitude>``.

Every subcommand exits 0 only if all of its monitors and checks passed.
Failures are listed in a machine-readable ``summary.json`` (when ``--out``
is given) and echoed to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .analysis import find_equilibria
from .attitude import RigidBodyState, equivalence_check, simulate_attitude
from .checks import run_checks
from .errors import ScenarioValidationError, SphereCtlError
from .geometry import sphere_angle
from .obstacle import SEPARATIONS
from .scenario import Scenario, load_scenario, shipped_scenario_path
from .sim import Trajectory, batch_simulate


CSV_FORMAT = "%.17g"
CONVERGE_ANGLE = 1e-2
CONVERGE_SPEED = 1e-3


def _resolve(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    # bare names such as "s2_six_star" refer to the scenarios bundled with the package
    shipped = shipped_scenario_path(p.stem)
    return shipped if shipped.exists() else p


def _scenario(args) -> Scenario:
    scenario = load_scenario(_resolve(args.scenario))
    if args.separation:
        scenario = scenario.with_separation(args.separation)
    overrides = {}
    if args.h is not None:
        overrides["h"] = args.h
    if args.horizon is not None:
        overrides["horizon"] = args.horizon
    if overrides:
        scenario = replace(scenario, sim=replace(scenario.sim, **overrides))
    return scenario


def _write_csv(path: Path, columns: list[str], rows: np.ndarray) -> None:
    np.savetxt(path, rows, delimiter=",", fmt=CSV_FORMAT, header=",".join(columns), comments="")


def _finish(out: Path | None, summary: dict, failures: list[str]) -> int:
    summary["failures"] = failures
    summary["passed"] = not failures
    if out is not None:
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    for f in failures:
        print(f"FAILED: {f}", file=sys.stderr)
    return 1 if failures else 0


def _outdir(args) -> Path | None:
    if not args.out:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    scenario = _scenario(args)
    shipped = scenario.seeds()
    want = len(shipped) if args.seeds is None else args.seeds
    seeds = shipped[:want]
    if want > len(seeds):
        seeds += scenario.random_seeds(want - len(seeds), seed=args.rng_seed)
    config = replace(scenario.sim, log_every=args.log_every)
    trajs = batch_simulate(scenario, seeds, config)
    out = _outdir(args)
    failures, records = [], []
    print(f"{'seed':>4} {'status':<10} {'min d_U':>10} {'max |u|':>10} {'V incr':>10} {'t_clear':>8} {'dist':>10} {'|v|':>10}")
    for i, tr in enumerate(trajs):
        if out is not None and len(tr.log):
            _write_csv(out / f"seed_{i:03d}.csv", Trajectory.columns(tr.dim), tr.log)
        rec = _trajectory_record(scenario, i, tr)
        records.append(rec)
        print(f"{i:>4} {tr.status:<10} {tr.min_separation:>10.4g} {tr.max_control:>10.4g} "
              f"{tr.max_v_increase:>10.3g} {tr.clearance_time:>8.3f} {rec['final_distance']:>10.3g} {rec['final_speed']:>10.3g}")
        if not tr.ok:
            failures.append(f"seed {i}: {tr.status} {tr.message}".strip())
        if tr.monotone_violations:
            failures.append(f"seed {i}: V increased on {tr.monotone_violations} steps")
        if not tr.min_separation > 0:
            failures.append(f"seed {i}: separation reached {tr.min_separation:.3g}")
        if not math.isfinite(tr.max_control):
            failures.append(f"seed {i}: non-finite control")
    converged = sum(r["converged"] for r in records)
    print(f"converged {converged}/{len(records)}")
    summary = {"command": "simulate", "scenario": scenario.name, "h": config.h, "horizon": config.horizon,
               "separation": scenario.controller.separation, "seeds": records, "converged": converged}
    return _finish(out, summary, failures)


def _trajectory_record(scenario: Scenario, i: int, tr: Trajectory) -> dict:
    dist = speed = math.nan
    if tr.final is not None:
        dist = float(sphere_angle(tr.final.x, scenario.target))
        speed = float(np.linalg.norm(tr.final.v))
    return {
        "seed": i,
        "status": tr.status,
        "message": tr.message,
        "steps": tr.steps,
        "min_separation": tr.min_separation,
        "max_control": tr.max_control,
        "max_v_increase": tr.max_v_increase,
        "monotone_violations": tr.monotone_violations,
        "clearance_time": tr.clearance_time,
        "final_distance": dist,
        "final_speed": speed,
        "converged": bool(dist < CONVERGE_ANGLE and speed < CONVERGE_SPEED),
    }


def cmd_equilibria(args) -> int:
    scenario = _scenario(args)
    reports = find_equilibria(scenario, args.grid)
    out = _outdir(args)
    lines = [json.dumps(r.as_record()) for r in reports]
    if out is not None:
        (out / "equilibria.jsonl").write_text("".join(line + "\n" for line in lines))
    else:
        for line in lines:
            print(line)
    failures = []
    if not any(r.classification == "target" for r in reports):
        failures.append("target not classified as a stable equilibrium")
    for r in reports:
        if r.classification == "indeterminate":
            failures.append(f"indeterminate equilibrium at {np.round(r.x_star, 6).tolist()}")
        if r.jx_residual >= 1e-6:
            failures.append(f"|J x*| = {r.jx_residual:.2e} at {np.round(r.x_star, 6).tolist()}")
    counts = {}
    for r in reports:
        counts[r.classification] = counts.get(r.classification, 0) + 1
    print(f"{len(reports)} equilibria: " + ", ".join(f"{v} {k}" for k, v in sorted(counts.items())), file=sys.stderr)
    summary = {"command": "equilibria", "scenario": scenario.name, "grid": args.grid, "counts": counts}
    return _finish(out, summary, failures)


def cmd_check(args) -> int:
    scenario = _scenario(args)
    results = run_checks(scenario, samples=args.samples, grid=args.grid)
    for r in results:
        print(r.row())
    out = _outdir(args)
    failures = [r.name for r in results if not r.passed]
    summary = {
        "command": "check",
        "scenario": scenario.name,
        "results": [{"name": r.name, "passed": r.passed, "value": r.value, "limit": r.threshold, "detail": r.detail}
                    for r in results],
    }
    return _finish(out, summary, failures)


def cmd_attitude(args) -> int:
    scenario = _scenario(args)
    if scenario.attitude is None:
        print("scenario has no attitude block", file=sys.stderr)
        return 2
    points = scenario.seed_points
    omegas = list(scenario.attitude.omega0)
    count = len(points) if args.seeds is None else min(args.seeds, len(points))
    h, horizon = scenario.sim.h, scenario.sim.horizon
    out = _outdir(args)
    failures, records = [], []
    for i in range(count):
        w0 = omegas[i] if i < len(omegas) else np.zeros(3)
        state = RigidBodyState(points[i], w0)
        tr = simulate_attitude(scenario, state, h, horizon)
        if out is not None:
            cols = ["t", "x0", "x1", "x2", "x3", "w0", "w1", "w2", "d_U", "norm_w_err", "norm_v_err"]
            rows = np.column_stack([tr.times, tr.x, tr.omega, tr.d_U, tr.omega_err, tr.v_err])
            _write_csv(out / f"attitude_{i:03d}.csv", cols, rows)
        rise = float(np.max(np.diff(tr.omega_err))) if len(tr.omega_err) > 1 else 0.0
        rec = {"seed": i, "status": tr.status, "min_separation": float(np.min(tr.d_U)),
               "final_distance": float(sphere_angle(tr.x[-1], scenario.target)),
               "max_omega_err_increase": rise}
        if not tr.ok:
            failures.append(f"attitude seed {i}: {tr.status} {tr.message}".strip())
        if rise > scenario.sim.monotone_slack:
            failures.append(f"attitude seed {i}: |w - w_f| increased by {rise:.3g}")
        if not args.no_equivalence:
            eq = equivalence_check(scenario, state, h, horizon)
            rec.update(max_state_error=eq.max_state_error, max_x_error=eq.max_x_error,
                       max_identity_error=eq.max_identity_error, equivalent=eq.passed())
            if not eq.passed():
                failures.append(f"attitude seed {i}: sphere equivalence state error {eq.max_state_error:.3g}, "
                                f"identity error {eq.max_identity_error:.3g}")
        records.append(rec)
        line = f"seed {i}: {tr.status} min d_U {rec['min_separation']:.4g} final dist {rec['final_distance']:.3g}"
        if "max_state_error" in rec:
            line += f" equivalence {rec['max_state_error']:.3g} identity {rec['max_identity_error']:.3g}"
        print(line)
    summary = {"command": "attitude", "scenario": scenario.name, "h": h, "horizon": horizon, "seeds": records}
    return _finish(out, summary, failures)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spherectl", description="Safe stabilization on the n-sphere.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", required=True, help="scenario JSON path or a bundled scenario name")
        p.add_argument("--out", help="output directory")
        p.add_argument("--h", type=float, help="integration step (s)")
        p.add_argument("--horizon", type=float, help="simulated time (s)")
        p.add_argument("--separation", choices=sorted(SEPARATIONS), help="separation function for the damping")
        p.add_argument("--seeds", type=int, help="number of initial conditions")

    p = sub.add_parser("simulate", help="batch trajectories to CSV")
    common(p)
    p.add_argument("--log-every", type=int, default=1, help="keep every k-th step in the CSV")
    p.add_argument("--rng-seed", type=int, default=0, help="seed for extra random initial conditions")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("equilibria", help="locate and classify equilibria")
    common(p)
    p.add_argument("--grid", type=int, default=4096, help="Newton start count (>= 1000)")
    p.set_defaults(func=cmd_equilibria)

    p = sub.add_parser("check", help="gradient, Jacobian and eigenstructure checks")
    common(p)
    p.add_argument("--samples", type=int, default=1000, help="samples per derivative check")
    p.add_argument("--grid", type=int, default=2000, help="Newton start count for the equilibrium search")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("attitude", help="quaternion closed loop and the sphere equivalence check")
    common(p)
    p.add_argument("--no-equivalence", action="store_true", help="skip the dual simulation")
    p.set_defaults(func=cmd_attitude)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "seeds", None) is not None and args.seeds < 0:
        print("--seeds must be non-negative", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ScenarioValidationError as exc:
        print("invalid scenario:", file=sys.stderr)
        for err in exc.errors:
            print(f"  {err}", file=sys.stderr)
        return 2
    except (SphereCtlError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
