"""Command line entry point: ``movingfront <command> [options]``.

Exit status is 0 when every reported check or metric passes, 1 when a check
fails, and 2 on usage or input errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .asymptotics import AsymptoticSolution, composite_u0
from .config import load_spec
from .errors import MovingFrontError, NoRootFound
from .forward import solve_forward
from .inverse import (
    MeasurementKind,
    MeasurementSet,
    ip1_measurements,
    ip1_recover,
    ip2_measurements,
    ip2_recover,
)
from .model import SpaceTimeGrid, validate_assumption1, validate_assumption2

log = logging.getLogger("movingfront")


def _grid(args, spec) -> SpaceTimeGrid:
    return SpaceTimeGrid.uniform(args.grid_nx, args.grid_nt, spec.period)


def _need_config(args):
    if not args.config:
        raise SystemExit("error: --config is required for this command")
    return load_spec(args.config)


def _out(args, default: str) -> Path:
    path = Path(args.out or default)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _read_columns(path, names):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [n for n in names if n not in (reader.fieldnames or [])]
        if missing:
            raise SystemExit(f"error: {path} lacks columns {', '.join(missing)}")
        rows = list(reader)
    return [np.array([float(r[n]) for r in rows]) for n in names]


def cmd_validate(args) -> int:
    spec = _need_config(args)
    reports = [validate_assumption1(spec)]
    try:
        reports.append(validate_assumption2(spec))
    except NoRootFound as exc:
        print(f"assumption 2: FAIL\n  {exc}")
        reports.append(None)
    for r in reports:
        if r is not None:
            print(r.summary())
    return 0 if all(r is not None and r.passed for r in reports) else 1


def cmd_asymptotic(args) -> int:
    spec = _need_config(args)
    asym = AsymptoticSolution(spec)
    grid = _grid(args, spec)
    x, t = grid.x_nodes, grid.t_nodes
    x0 = asym.x0(t)
    bounds = asym.layer_bounds(t, clip=True)
    path = _out(args, "asymptotic.csv")
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "t", "u0", "branch", "x0_of_t", "xhat_l", "xhat_r"])
        for j, tj in enumerate(t):
            u = composite_u0(asym, x, np.full_like(x, tj))
            for xi, ui in zip(x, u):
                branch = "left" if xi <= x0[j] else "right"
                w.writerow([repr(float(xi)), repr(float(tj)), repr(float(ui)), branch,
                            repr(float(x0[j])), repr(float(bounds.x_hat_l[j])),
                            repr(float(bounds.x_hat_r[j]))])
    print(f"wrote {path}")
    return 0


def cmd_forward(args) -> int:
    spec = _need_config(args)
    sol = solve_forward(spec, _grid(args, spec))
    path = _out(args, "forward.csv")
    harness.write_solution_csv(sol, path)
    err = harness.forward_error(sol, AsymptoticSolution(spec))
    meta = {
        "scheme": sol.scheme,
        "periods": sol.periods,
        "periodicity_residual": sol.periodicity_residual,
        "tolerance": sol.tolerance,
        "converged": sol.converged,
        "newton_iterations": sol.newton_iterations,
        "relative_l2_vs_U0": err,
        **sol.metadata,
    }
    sidecar = path.with_suffix(".json")
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path} and {sidecar}; periods {sol.periods}, "
          f"relative L2 distance to U0 {err:.6g}")
    return 0 if sol.converged else 1


def _write_curve(path, variable, nodes, values, column="f_rec"):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([variable, column])
        for a, b in zip(nodes, values):
            w.writerow([repr(float(a)), repr(float(b))])


def cmd_ip1(args) -> int:
    spec = _need_config(args)
    asym = AsymptoticSolution(spec)
    if args.synthesize:
        sol = solve_forward(spec, _grid(args, spec))
        kind = MeasurementKind.SPATIAL_VALUE if args.values else MeasurementKind.SPATIAL_GRADIENT
        meas = ip1_measurements(sol, args.t0, args.k, args.delta, args.seed, kind)
    elif args.data:
        with open(args.data) as fh:
            header = fh.readline().strip().split(",")
        if "omega" in header:
            x, obs = _read_columns(args.data, ["x", "omega"])
            kind = MeasurementKind.SPATIAL_GRADIENT
        else:
            x, obs = _read_columns(args.data, ["x", "u"])
            kind = MeasurementKind.SPATIAL_VALUE
        meas = MeasurementSet(kind, x, obs, args.delta, t0=args.t0)
    else:
        raise SystemExit("error: ip1 needs --data or --synthesize")
    rec = ip1_recover(meas, layer=asym.layer_bounds(args.t0, clip=True))
    path = _out(args, "ip1.csv")
    xs = np.linspace(0.0, 1.0, args.k + 1)
    _write_curve(path, "x", xs, rec(xs))
    _write_curve(path.with_name(path.stem + "_prefit.csv"), "x", rec.prefit_nodes, rec.prefit_values, "omega")
    print(f"wrote {path}; epsilon {rec.epsilon_used:.4g} ({rec.selection}), "
          f"excluded [{rec.excluded_interval[0]:.4f}, {rec.excluded_interval[1]:.4f}]")
    return 0 if rec.selection in ("ok", "fixed") else 1


def cmd_ip2(args) -> int:
    spec = _need_config(args)
    a = args.a if args.a is not None else (spec.a_margin or harness.EX2_A)
    if args.synthesize:
        asym = AsymptoticSolution(spec)
        sol = solve_forward(spec, _grid(args, spec))
        meas = ip2_measurements(sol, asym, args.k, args.delta, args.seed, spec.time_horizon)
    elif args.data:
        t, u0, u1, xtp = _read_columns(args.data, ["t", "u0", "u1", "xtp"])
        meas = MeasurementSet(MeasurementKind.TEMPORAL_TRIPLES, t,
                              np.column_stack([u0, u1, xtp]), args.delta)
    else:
        raise SystemExit("error: ip2 needs --data or --synthesize")
    rec = ip2_recover(meas, a)
    path = _out(args, "ip2.csv")
    _write_curve(path, "t", meas.nodes, rec(meas.nodes))
    _write_curve(path.with_name(path.stem + "_prefit.csv"), "t", rec.prefit_nodes, rec.prefit_values, "f_i")
    print(f"wrote {path}; epsilon {rec.epsilon_used:.4g} ({rec.selection}), "
          f"{len(rec.prefit_nodes)} of {len(meas.nodes)} nodes used")
    return 0 if rec.selection in ("ok", "fixed") else 1


def _finish(reports, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    for r in reports:
        (out_dir / f"{r.experiment}.json").write_text(r.to_text(include_runtime=False))
        print(r.summary())
    timing = {r.experiment: r.runtime for r in reports}
    (out_dir / "timing.json").write_text(json.dumps(timing, indent=2, sort_keys=True) + "\n")
    return 0 if all(r.passed for r in reports) else 1


def _example(args, which: int) -> int:
    grid = (args.grid_nx, args.grid_nt)
    inverse = "ip1" if which == 1 else "ip2"
    modes = ["forward", inverse] if args.mode == "all" else [args.mode]
    deltas = [args.delta] if args.delta is not None else [0.001, 0.01]
    run = harness.run_example1 if which == 1 else harness.run_example2
    reports = []
    for mode in modes:
        if mode == "forward":
            reports.append(run("forward", seed=args.seed, grid=grid))
        else:
            for d in deltas:
                kw = {"exclusion": args.exclusion} if which == 1 else {}
                r = run(mode, delta=d, seed=args.seed, repetitions=args.repetitions,
                        grid=grid, workers=args.workers, **kw)
                r.experiment = f"{r.experiment}-delta{d:g}"
                reports.append(r)
    out_dir = Path(args.out or f"example{which}-out")
    harness.export_plot_data(which, out_dir, grid, delta=deltas[0], seed=args.seed)
    return _finish(reports, out_dir)


def cmd_example1(args) -> int:
    return _example(args, 1)


def cmd_example2(args) -> int:
    return _example(args, 2)


def cmd_convergence(args) -> int:
    report = harness.run_convergence_study(args.problem, seeds=args.repetitions,
                                           seed=args.seed, workers=args.workers)
    return _finish([report], Path(args.out or "convergence-out"))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="problem description file (key = value)")
    common.add_argument("--delta", type=float, default=None, help="relative noise level")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--grid-nx", type=int, default=harness.DEFAULT_GRID[0], help="x nodes")
    common.add_argument("--grid-nt", type=int, default=harness.DEFAULT_GRID[1], help="t nodes per period")
    common.add_argument("--synthesize", action="store_true",
                        help="generate measurements from a forward solve instead of --data")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="movingfront", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common], help="check the solvability conditions")
    sub.add_parser("asymptotic", parents=[common], help="tabulate the asymptotic solution")
    sub.add_parser("forward", parents=[common], help="periodic forward solve")

    q = sub.add_parser("ip1", parents=[common], help="recover f(x) from one time slice")
    q.add_argument("--data", help="CSV with columns x,omega (gradient) or x,u (values)")
    q.add_argument("--t0", type=float, default=harness.EX1_T0)
    q.add_argument("--k", type=int, default=harness.EX1_K)
    q.add_argument("--values", action="store_true", help="synthesize u instead of du/dx")

    q = sub.add_parser("ip2", parents=[common], help="recover f(t) from boundary traces")
    q.add_argument("--data", help="CSV with columns t,u0,u1,xtp")
    q.add_argument("--k", type=int, default=harness.EX2_K)
    q.add_argument("--a", type=float, default=None, help="margin for |1 - 2 x_tp|")

    for name, inverse in (("example1", "ip1"), ("example2", "ip2")):
        q = sub.add_parser(name, parents=[common], help=f"reference problem {name[-1]}")
        q.add_argument("--mode", choices=["forward", inverse, "all"], default="all")
        q.add_argument("--repetitions", type=int, default=harness.DEFAULT_REPETITIONS)
        q.add_argument("--workers", type=int, default=1)
        if name == "example1":
            q.add_argument("--exclusion", choices=["layer", "indices"], default="layer")

    q = sub.add_parser("convergence", parents=[common], help="noise-level convergence study")
    q.add_argument("--problem", choices=["ip1", "ip2"], default="ip2")
    q.add_argument("--repetitions", type=int, default=harness.DEFAULT_REPETITIONS)
    q.add_argument("--workers", type=int, default=1)
    return p


COMMANDS = {
    "validate": cmd_validate,
    "asymptotic": cmd_asymptotic,
    "forward": cmd_forward,
    "ip1": cmd_ip1,
    "ip2": cmd_ip2,
    "example1": cmd_example1,
    "example2": cmd_example2,
    "convergence": cmd_convergence,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command in ("ip1", "ip2") and args.delta is None:
        args.delta = 0.0
    try:
        return COMMANDS[args.command](args)
    except (MovingFrontError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
