"""Experiment drivers, reports and plot-data export.

Each driver builds one of the two reference problems, runs a pipeline and
returns an :class:`ExperimentReport` whose metrics carry a reference value
and an acceptance band.  Noise experiments report the median over a list of
repetitions, each with its own random stream derived from (seed, repetition).
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .asymptotics import AsymptoticSolution, composite_u0
from .config import EXAMPLE1_CONFIG, EXAMPLE2_CONFIG, spec_from_text
from .forward import GridSolution, solve_forward, spatial_gradient, transition_track
from .inverse import (
    MeasurementKind,
    exclusion_from_indices,
    ip1_measurements,
    ip1_recover,
    ip2_measurements,
    ip2_recover,
    repetition_rng,
    with_noise,
)
from .metrics import relative_l2_error
from .model import ProblemSpec, SpaceTimeGrid

log = logging.getLogger(__name__)

__all__ = [
    "Metric",
    "ExperimentReport",
    "relative_l2_error",
    "judge",
    "run_example1",
    "run_example2",
    "run_convergence_study",
    "run_layer_study",
    "export_plot_data",
]

REPORT_FORMAT = "movingfront-report/1"
DEFAULT_REPETITIONS = 10
DEFAULT_GRID = (801, 401)

# Published values and the bands we accept around them.
EX1_FORWARD = (0.010154, (0.005, 0.02))
EX1_IP1 = {0.001: (0.018169, (0.0, 0.037)), 0.01: (0.027691, (0.0, 0.056))}
EX2_FORWARD = (0.0176743, (0.009, 0.035))
EX2_IP2 = {0.001: (0.018942, (0.0, 0.038)), 0.01: (0.039787, (0.0, 0.08))}
SLOPE_TARGET = (0.5, (0.3, 0.7))

EX1_T0 = 1.0
EX1_K = 200
EX1_EXCLUDED_INDICES = (90, 110)
EX2_K = 40
EX2_A = 0.05


def judge(value: float, band: Sequence[float]) -> bool:
    """True when ``value`` lies in the closed band (nan never passes)."""
    lo, hi = band
    return bool(lo <= value <= hi)


@dataclass(frozen=True)
class Metric:
    name: str
    value: float
    target: Optional[float]
    band: tuple[float, float]
    domain: str = ""

    @property
    def passed(self) -> bool:
        return judge(self.value, self.band)


@dataclass
class ExperimentReport:
    experiment: str
    inputs: dict
    metrics: list[Metric] = field(default_factory=list)
    details: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    runtime: Optional[float] = None

    @property
    def passed(self) -> bool:
        return all(m.passed for m in self.metrics)

    def add(self, name, value, target, band, domain="") -> Metric:
        m = Metric(name, float(value), None if target is None else float(target),
                   (float(band[0]), float(band[1])), domain)
        self.metrics.append(m)
        return m

    def to_dict(self, include_runtime: bool = True) -> dict:
        d = {
            "format": REPORT_FORMAT,
            "experiment": self.experiment,
            "inputs": self.inputs,
            "metrics": [
                {**asdict(m), "band": list(m.band), "passed": m.passed} for m in self.metrics
            ],
            "details": self.details,
            "notes": list(self.notes),
            "passed": self.passed,
        }
        if include_runtime:
            d["runtime"] = self.runtime
        return d

    def to_text(self, include_runtime: bool = True) -> str:
        # json writes floats with repr, so the round trip is exact.
        return json.dumps(self.to_dict(include_runtime), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentReport":
        d = json.loads(text)
        if d.get("format") != REPORT_FORMAT:
            raise ValueError(f"unknown report format {d.get('format')!r}")
        metrics = [
            Metric(m["name"], m["value"], m["target"], tuple(m["band"]), m.get("domain", ""))
            for m in d["metrics"]
        ]
        return cls(d["experiment"], d["inputs"], metrics, d.get("details", {}),
                   d.get("notes", []), d.get("runtime"))

    def summary(self) -> str:
        lines = [f"{self.experiment}: {'PASS' if self.passed else 'FAIL'}"]
        for m in self.metrics:
            target = "" if m.target is None else f" (reference {m.target:.6g})"
            lines.append(
                f"  {m.name} = {m.value:.6g} band [{m.band[0]:.6g}, {m.band[1]:.6g}]"
                f"{target} {'ok' if m.passed else 'FAIL'}"
            )
        lines.extend(f"  note: {n}" for n in self.notes)
        if self.runtime is not None:
            lines.append(f"  runtime {self.runtime:.2f} s")
        return "\n".join(lines)


def spec_digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def example_spec(which: int) -> ProblemSpec:
    return spec_from_text(EXAMPLE1_CONFIG if which == 1 else EXAMPLE2_CONFIG)


@lru_cache(maxsize=16)
def _cached_forward(which: int, nx: int, nt: int, mu: Optional[float]) -> GridSolution:
    spec = example_spec(which)
    if mu is not None:
        spec = spec.with_mu(mu)
    return solve_forward(spec, SpaceTimeGrid.uniform(nx, nt, spec.period))


def forward_solution(which: int, grid=DEFAULT_GRID, mu: Optional[float] = None) -> GridSolution:
    """Periodic solve for reference problem 1 or 2, memoised per grid and mu."""
    return _cached_forward(which, int(grid[0]), int(grid[1]), mu)


def unrolled(sol: GridSolution, horizon: float):
    """(t, values) covering [t0, t0 + horizon] by repeating the periodic solution."""
    periods = horizon / sol.period
    n = int(round(periods))
    if n < 1 or abs(periods - n) > 1e-9:
        raise ValueError("horizon must be a whole number of periods")
    t, v = sol.t, sol.values
    ts = [t] + [t[1:] + k * sol.period for k in range(1, n)]
    vs = [v] + [v[1:]] * (n - 1)
    return np.concatenate(ts), np.concatenate(vs)


def forward_error(sol: GridSolution, asym: AsymptoticSolution, horizon: Optional[float] = None) -> float:
    """Relative L2 distance between the numerical solution and U0 over [0, 1] x [0, horizon]."""
    horizon = sol.period if horizon is None else horizon
    t, values = unrolled(sol, horizon)
    X, T = np.meshgrid(sol.x, t)
    return relative_l2_error(values, composite_u0(asym, X, T), t, sol.x)


def _map_repetitions(fn: Callable[[int], float], reps: int, workers: int) -> list[float]:
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            out = list(pool.map(fn, range(reps)))
    else:
        out = [fn(r) for r in range(reps)]
    # pool.map keeps order, so the list is already sorted by repetition
    return out


def _inputs(config: str, grid, delta, seed, reps, **extra) -> dict:
    d = {
        "spec_digest": spec_digest(config),
        "grid": [int(grid[0]), int(grid[1])],
        "delta": float(delta),
        "seed": int(seed),
        "repetitions": int(reps),
    }
    d.update(extra)
    return d


def _noise_band(table: dict, delta: float):
    if delta in table:
        return table[delta]
    # no published value: accept anything finite but keep the row
    return None, (0.0, math.inf)


def run_example1(
    mode: str = "forward",
    delta: float = 0.0,
    seed: int = 0,
    repetitions: int = DEFAULT_REPETITIONS,
    grid=DEFAULT_GRID,
    exclusion: str = "layer",
    kind: MeasurementKind = MeasurementKind.SPATIAL_GRADIENT,
    workers: int = 1,
) -> ExperimentReport:
    """Reference problem 1: f(x) = x^2 + 1.5 with constant boundary values.

    ``exclusion`` selects the band dropped around the layer for f(x)
    recovery: "layer" uses the asymptotic layer bounds, "indices" keeps only
    the node indices 0..90 and 110..200.
    """
    started = time.perf_counter()
    spec = example_spec(1)
    asym = AsymptoticSolution(spec)
    sol = forward_solution(1, grid)
    if mode == "forward":
        report = ExperimentReport("example1-forward",
                                  _inputs(EXAMPLE1_CONFIG, grid, 0.0, seed, 1))
        err = forward_error(sol, asym)
        report.add("relative_l2_u_vs_U0", err, *EX1_FORWARD, domain="[0,1]x[0,2]")
        report.details.update(periods=sol.periods, periodicity_residual=sol.periodicity_residual,
                              x_tp_at_t0=float(transition_track(sol, asym, [EX1_T0]).x_tp[0]))
    elif mode == "ip1":
        if exclusion not in ("layer", "indices"):
            raise ValueError("exclusion must be 'layer' or 'indices'")
        report = ExperimentReport(
            "example1-ip1",
            _inputs(EXAMPLE1_CONFIG, grid, delta, seed, repetitions, t0=EX1_T0, k=EX1_K,
                    exclusion=exclusion, data=kind.value),
        )
        clean = ip1_measurements(sol, EX1_T0, EX1_K, 0.0, kind=kind)
        layer = asym.layer_bounds(EX1_T0)
        excluded = exclusion_from_indices(clean.nodes, *EX1_EXCLUDED_INDICES) if exclusion == "indices" else None
        truth = lambda x: x ** 2 + 1.5

        def one(rep):
            meas = with_noise(clean, delta, repetition_rng(seed, rep))
            return ip1_recover(meas, layer=layer, excluded=excluded, truth=truth).relative_error

        errs = _map_repetitions(one, repetitions, workers)
        target, band = _noise_band(EX1_IP1, delta)
        report.add("median_relative_l2_f", float(np.median(errs)), target, band, domain="[0,1]")
        report.details["errors"] = [float(e) for e in errs]
    else:
        raise ValueError(f"mode must be 'forward' or 'ip1', got {mode!r}")
    report.runtime = time.perf_counter() - started
    return report


def run_example2(
    mode: str = "forward",
    delta: float = 0.0,
    seed: int = 0,
    repetitions: int = DEFAULT_REPETITIONS,
    grid=DEFAULT_GRID,
    workers: int = 1,
) -> ExperimentReport:
    """Reference problem 2: f(t) = cos(t) + 2 with time-periodic boundary traces."""
    started = time.perf_counter()
    spec = example_spec(2)
    asym = AsymptoticSolution(spec)
    sol = forward_solution(2, grid)
    horizon = spec.time_horizon
    if mode == "forward":
        report = ExperimentReport("example2-forward",
                                  _inputs(EXAMPLE2_CONFIG, grid, 0.0, seed, 1, horizon=horizon))
        err = forward_error(sol, asym, horizon)
        report.add("relative_l2_u_vs_U0", err, *EX2_FORWARD, domain="[0,1]x[0,4pi]")
        track = transition_track(sol, asym)
        report.details.update(periods=sol.periods, periodicity_residual=sol.periodicity_residual,
                              max_x_tp=float(np.max(track.x_tp)),
                              max_x_tp_minus_x0=float(np.max(np.abs(track.x_tp - asym.x0(track.t_nodes)))))
    elif mode == "ip2":
        report = ExperimentReport(
            "example2-ip2",
            _inputs(EXAMPLE2_CONFIG, grid, delta, seed, repetitions, k=EX2_K, a=EX2_A, horizon=horizon),
        )
        clean = ip2_measurements(sol, asym, EX2_K, 0.0, horizon=horizon)
        truth = lambda t: np.cos(t) + 2.0

        def one(rep):
            meas = with_noise(clean, delta, repetition_rng(seed, rep))
            return ip2_recover(meas, EX2_A, truth=truth).relative_error

        errs = _map_repetitions(one, repetitions, workers)
        target, band = _noise_band(EX2_IP2, delta)
        report.add("median_relative_l2_f", float(np.median(errs)), target, band, domain="[0,4pi]")
        report.details["errors"] = [float(e) for e in errs]
    else:
        raise ValueError(f"mode must be 'forward' or 'ip2', got {mode!r}")
    report.runtime = time.perf_counter() - started
    return report


# --- convergence and layer studies ------------------------------------------

CONVERGENCE_DELTAS = (1e-4, 10 ** -3.5, 1e-3, 10 ** -2.5, 1e-2)
MU_EXPONENT = 0.6


def convergence_setup(problem: str, delta: float):
    """(mu, k, grid) used for one noise level: mu = delta^0.6, node spacing ~ sqrt(delta)."""
    mu = delta ** MU_EXPONENT
    scale = math.sqrt(1e-3 / delta)
    base_k = EX1_K if problem == "ip1" else EX2_K
    k = max(8, int(round(base_k * scale)))
    nx = max(DEFAULT_GRID[0], 2 * (int(math.ceil(6.0 / mu)) // 2) + 1)
    if problem == "ip1":
        nx = max(nx, 4 * k + 1)
    return mu, k, (nx, DEFAULT_GRID[1])


def fit_loglog_slope(x, y) -> float:
    x, y = np.asarray(x, float), np.asarray(y, float)
    if len(x) < 2:
        raise ValueError("need at least two points for a slope")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def run_convergence_study(
    problem: str = "ip2",
    deltas: Sequence[float] = CONVERGENCE_DELTAS,
    seeds: int = DEFAULT_REPETITIONS,
    seed: int = 0,
    workers: int = 1,
) -> ExperimentReport:
    """Median recovery error against delta with mu = delta^0.6 and h ~ sqrt(delta)."""
    if problem not in ("ip1", "ip2"):
        raise ValueError("problem must be 'ip1' or 'ip2'")
    deltas = [float(d) for d in deltas]
    if len(deltas) < 4:
        raise ValueError("a convergence study needs at least 4 noise levels")
    started = time.perf_counter()
    which = 1 if problem == "ip1" else 2
    config = EXAMPLE1_CONFIG if which == 1 else EXAMPLE2_CONFIG
    rows = []
    for delta in deltas:
        mu, k, grid = convergence_setup(problem, delta)
        spec = example_spec(which).with_mu(mu)
        asym = AsymptoticSolution(spec)
        sol = forward_solution(which, grid, mu=mu)
        if which == 1:
            clean = ip1_measurements(sol, EX1_T0, k, 0.0)
            layer = asym.layer_bounds(EX1_T0, clip=True)
            truth = lambda x: x ** 2 + 1.5

            def one(rep, clean=clean, layer=layer, delta=delta):
                meas = with_noise(clean, delta, repetition_rng(seed, rep))
                return ip1_recover(meas, layer=layer, truth=truth).relative_error
        else:
            clean = ip2_measurements(sol, asym, k, 0.0, horizon=spec.time_horizon)
            truth = lambda t: np.cos(t) + 2.0

            def one(rep, clean=clean, delta=delta):
                meas = with_noise(clean, delta, repetition_rng(seed, rep))
                return ip2_recover(meas, EX2_A, truth=truth).relative_error

        errs = _map_repetitions(one, seeds, workers)
        median = float(np.median(errs))
        layer_term = mu * abs(math.log(mu))
        h1 = float(np.max(np.diff(clean.nodes)))
        bound = layer_term + h1 + math.sqrt(delta)
        rows.append({"delta": delta, "mu": mu, "k": k, "grid": list(grid),
                     "median_error": median, "mu_log_mu": layer_term, "h1": h1,
                     "bound_ratio": median / bound,
                     "floor": bool(layer_term > h1 + math.sqrt(delta))})
        log.info("%s delta=%.3g mu=%.4g k=%d median=%.4g", problem, delta, mu, k, median)
    slope = fit_loglog_slope([r["delta"] for r in rows], [r["median_error"] for r in rows])
    report = ExperimentReport(
        f"convergence-{problem}",
        {"spec_digest": spec_digest(config), "deltas": deltas, "seed": int(seed),
         "repetitions": int(seeds), "mu_exponent": MU_EXPONENT},
    )
    report.add("loglog_slope", slope, *SLOPE_TARGET, domain="median error vs delta")
    report.details["rows"] = rows
    for r in rows:
        if r["floor"]:
            report.notes.append(f"delta={r['delta']:.3g}: mu|ln mu| term dominates the estimate (floor)")
    report.runtime = time.perf_counter() - started
    return report


LAYER_MUS = (0.04, 0.02, 0.01)
LAYER_CONSTANT_BOUND = 5.0
OUTER_RATIO_BOUND = 2.0


def layer_constants(sol: GridSolution, asym: AsymptoticSolution, x_ref: float) -> dict:
    """Scaled deviations of the numerical solution from the asymptotic picture.

    ``position``: max_t |x_tp - x_ref| / (mu |ln mu|); ``value`` and ``slope``:
    max over points outside [x_hat_l, x_hat_r] of |u - phi| / mu and
    |u_x - dphi/dx| / mu.
    """
    mu = asym.mu
    track = transition_track(sol, asym)
    bounds = asym.layer_bounds(sol.t)
    X, T = np.meshgrid(sol.x, sol.t)
    left = X < bounds.x_hat_l[:, None]
    right = X > bounds.x_hat_r[:, None]
    phi = np.where(left, asym.outer.left(X, T), asym.outer.right(X, T))
    ux = np.array([spatial_gradient(row, sol.x) for row in sol.values])
    outside = left | right
    dev = np.abs(sol.values - phi)[outside]
    gdev = np.abs(ux - asym.outer.slope(X, T))[outside]
    return {
        "mu": mu,
        "position": float(np.max(np.abs(track.x_tp - x_ref)) / (mu * abs(math.log(mu)))),
        "value": float(np.max(dev) / mu),
        "slope": float(np.max(gdev) / mu),
    }


def run_layer_study(mus: Sequence[float] = LAYER_MUS, grid=(1601, 401), x_ref: float = 0.486) -> ExperimentReport:
    """Layer-position and outside-layer constants on reference problem 1 over several mu."""
    started = time.perf_counter()
    rows = []
    for mu in mus:
        spec = example_spec(1).with_mu(mu)
        rows.append(layer_constants(forward_solution(1, grid, mu=mu), AsymptoticSolution(spec), x_ref))
    report = ExperimentReport(
        "layer-study",
        {"spec_digest": spec_digest(EXAMPLE1_CONFIG), "mus": [float(m) for m in mus],
         "grid": [int(grid[0]), int(grid[1])], "x_ref": x_ref},
    )
    report.add("max_position_constant", max(r["position"] for r in rows),
               None, (0.0, LAYER_CONSTANT_BOUND))
    by_mu = {r["mu"]: r for r in rows}
    if 0.04 in by_mu and 0.02 in by_mu:
        for key in ("value", "slope"):
            a, b = by_mu[0.04][key], by_mu[0.02][key]
            ratio = max(a, b) / min(a, b)
            report.add(f"{key}_constant_ratio_mu_0.04_0.02", ratio, None, (1.0, OUTER_RATIO_BOUND))
    report.details["rows"] = rows
    report.runtime = time.perf_counter() - started
    return report


# --- plot data ---------------------------------------------------------------

def _write_csv(path: Path, header: Sequence[str], rows) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([repr(float(v)) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write plot data to {path}: {exc}") from exc
    return path


def write_solution_csv(sol: GridSolution, path, horizon: Optional[float] = None) -> Path:
    """Surface u(x, t) with header x,t,u, one row per grid node (t outer, x inner)."""
    t, values = unrolled(sol, sol.period if horizon is None else horizon)
    rows = ((xi, tj, u) for tj, row in zip(t, values) for xi, u in zip(sol.x, row))
    return _write_csv(path, ("x", "t", "u"), rows)


def write_coefficient_csv(nodes, truth: Callable, recovered: Callable, path, variable="t") -> Path:
    nodes = np.asarray(nodes, float)
    return _write_csv(path, (variable, "f_true", "f_rec"),
                      zip(nodes, truth(nodes), recovered(nodes)))


def write_track_csv(t, x_tp, x0, path) -> Path:
    return _write_csv(path, ("t", "x_tp", "x0"), zip(t, x_tp, x0))


def export_plot_data(which: int, out_dir, grid=DEFAULT_GRID, delta: float = 0.0, seed: int = 0) -> list[Path]:
    """Write the solution surface, layer track and one recovered coefficient curve.

    For problem 1 the coefficient curve is f(x) on the measurement nodes, for
    problem 2 it is f(t) on the k + 1 time nodes.
    """
    out = Path(out_dir)
    spec = example_spec(which)
    asym = AsymptoticSolution(spec)
    sol = forward_solution(which, grid)
    horizon = spec.time_horizon
    name = f"example{which}"
    paths = [write_solution_csv(sol, out / f"{name}_solution.csv", horizon)]
    t, _ = unrolled(sol, horizon)
    track = transition_track(sol, asym, t)
    paths.append(write_track_csv(t, track.x_tp, asym.x0(t), out / f"{name}_track.csv"))
    rng = repetition_rng(seed, 0)
    if which == 1:
        meas = with_noise(ip1_measurements(sol, EX1_T0, EX1_K, 0.0), delta, rng)
        rec = ip1_recover(meas, layer=asym.layer_bounds(EX1_T0))
        paths.append(write_coefficient_csv(meas.nodes, lambda x: x ** 2 + 1.5, rec,
                                           out / f"{name}_coefficient.csv", variable="x"))
    else:
        meas = with_noise(ip2_measurements(sol, asym, EX2_K, 0.0, horizon=horizon), delta, rng)
        rec = ip2_recover(meas, EX2_A)
        paths.append(write_coefficient_csv(meas.nodes, lambda s: np.cos(s) + 2.0, rec,
                                           out / f"{name}_coefficient.csv"))
    return paths
