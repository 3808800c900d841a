"""Time-periodic finite-volume solver and transition-point detection.

The equation is written in conservation form

    mu * u_t = d/dx (mu * u_x + u^2 / 2) - F(x, t) * u

and discretised on a vertex-centred grid.  The advective face value is the
face average where the cell Peclet number |u| dx / mu is at most 2, and the
upwind value otherwise (the wave speed is -u, so u < 0 takes the left
state).  Time stepping is BDF2 (BDF1 for the very first step) with a Newton
iteration on the tridiagonal Jacobian.  The periodic regime is reached by
marching whole periods until the end state repeats the start state.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Union

import numpy as np
from scipy.linalg import solve_banded

from .asymptotics import AsymptoticSolution, OuterBranches, composite_u0
from .errors import (
    LayerUnresolved,
    NewtonDivergence,
    NoPeriodicConvergence,
    NoSignChange,
)
from .model import ProblemSpec, SpaceTimeGrid

log = logging.getLogger(__name__)

SCHEME = "fv-hybrid-central-upwind/bdf2"
NEWTON_TOL = 1e-10
NEWTON_MAX = 25
MAX_PERIODS = 20
MIN_LAYER_CELLS = 8


@dataclass(frozen=True)
class GridSolution:
    """u(x_i, t_j) over one period, stored as ``values[j, i]``."""

    grid: SpaceTimeGrid
    values: np.ndarray
    periodicity_residual: float
    periods: int
    newton_iterations: int
    tolerance: float
    converged: bool = True
    scheme: str = SCHEME
    runtime: float = 0.0
    metadata: dict = field(default_factory=dict)

    @property
    def x(self):
        return self.grid.x_nodes

    @property
    def t(self):
        return self.grid.t_nodes

    @property
    def period(self) -> float:
        return float(self.t[-1] - self.t[0])

    def profile(self, t: float) -> np.ndarray:
        """u(., t), linear in time between stored levels, periodic in t."""
        t0 = self.t[0]
        s = (float(t) - t0) % self.period + t0
        j = int(np.clip(np.searchsorted(self.t, s, side="right") - 1, 0, len(self.t) - 2))
        w = (s - self.t[j]) / (self.t[j + 1] - self.t[j])
        return (1 - w) * self.values[j] + w * self.values[j + 1]

    def on_times(self, times) -> np.ndarray:
        """Stack of profiles at arbitrary (e.g. multi-period) times."""
        return np.array([self.profile(tk) for tk in np.atleast_1d(times)])

    def gradient(self, j: Optional[int] = None, profile: Optional[np.ndarray] = None) -> np.ndarray:
        u = self.values[j] if profile is None else profile
        return spatial_gradient(u, self.x)


def spatial_gradient(u: np.ndarray, x: np.ndarray) -> np.ndarray:
    """du/dx; fourth-order central differences on uniform grids, second order otherwise."""
    dx = np.diff(x)
    if len(x) >= 5 and np.allclose(dx, dx[0], rtol=1e-9, atol=0):
        h = dx[0]
        g = np.gradient(u, h, edge_order=2)
        g[2:-2] = (u[:-4] - 8 * u[1:-3] + 8 * u[3:-1] - u[4:]) / (12 * h)
        return g
    return np.gradient(u, x, edge_order=2)


def numerical_flux(u: np.ndarray, x: np.ndarray, mu: float):
    """Face flux mu*u_x + w^2/2 and its partial derivatives w.r.t. the two adjacent nodes."""
    dx = np.diff(x)
    ul, ur = u[:-1], u[1:]
    ubar = 0.5 * (ul + ur)
    central = np.abs(ubar) * dx <= 2.0 * mu
    from_left = ubar < 0
    w = np.where(central, ubar, np.where(from_left, ul, ur))
    dwl = np.where(central, 0.5, np.where(from_left, 1.0, 0.0))
    dwr = np.where(central, 0.5, np.where(from_left, 0.0, 1.0))
    flux = mu * (ur - ul) / dx + 0.5 * w * w
    return flux, w * dwl - mu / dx, w * dwr + mu / dx


class _Stepper:
    def __init__(self, spec: ProblemSpec, x: np.ndarray, newton_tol: float, newton_max: int):
        self.spec = spec
        self.mu = spec.mu
        self.x = x
        dx = np.diff(x)
        self.vol = 0.5 * (dx[:-1] + dx[1:])
        self.xi = x[1:-1]
        self.newton_tol = newton_tol
        self.newton_max = newton_max
        self.iterations = 0

    def residual(self, u, t, c0, hist, dt):
        flux, dl, dr = numerical_flux(u, self.x, self.mu)
        f = self.spec.field(self.xi, t)
        ui = u[1:-1]
        res = (self.mu * self.vol * (c0 * ui + hist) / dt
               - (flux[1:] - flux[:-1]) + self.vol * f * ui)
        return res, f, dl, dr

    def step(self, guess, t, c0, hist, dt, bc):
        u = guess.copy()
        u[0], u[-1] = bc
        res, f, dl, dr = self.residual(u, t, c0, hist, dt)
        norm = np.max(np.abs(res / self.vol))
        scale = max(1.0, float(np.max(np.abs(u))) ** 2)
        m = len(res)
        for it in range(self.newton_max):
            if norm <= self.newton_tol * scale:
                break
            ab = np.zeros((3, m))
            ab[1] = self.mu * self.vol * c0 / dt + self.vol * f - dl[1:] + dr[:-1]
            ab[0, 1:] = -dr[1:-1]
            ab[2, :-1] = dl[1:-1]
            du = solve_banded((1, 1), ab, -res)
            lam = 1.0
            for _ in range(12):
                trial = u.copy()
                trial[1:-1] += lam * du
                tres, tf, tdl, tdr = self.residual(trial, t, c0, hist, dt)
                tnorm = np.max(np.abs(tres / self.vol))
                if tnorm < norm or lam < 1e-3:
                    break
                lam *= 0.5
            u, res, f, dl, dr, norm = trial, tres, tf, tdl, tdr, tnorm
            self.iterations += 1
            if not np.all(np.isfinite(u)):
                raise NewtonDivergence(f"non-finite iterate at t={t:.6g}")
            if lam == 1.0 and np.max(np.abs(du)) <= 1e-13 * max(1.0, np.max(np.abs(u))):
                break
        else:
            if norm > 1e3 * self.newton_tol * scale:
                raise NewtonDivergence(
                    f"Newton did not converge at t={t:.6g} (residual {norm:.3e})"
                )
        return u


def _initial_profile(spec, grid, init, asym):
    x = grid.x_nodes
    if init is None:
        return composite_u0(asym, x, np.full_like(x, grid.t_nodes[0]))
    if callable(init):
        return np.asarray(init(x), float)
    u = np.asarray(init, float)
    if u.shape != x.shape:
        raise ValueError("initial profile must match the x grid")
    return u.copy()


def layer_cells(asym: AsymptoticSolution, grid: SpaceTimeGrid) -> int:
    """Fewest grid cells inside the layer [x_hat_l, x_hat_r] over the t grid."""
    bounds = asym.layer_bounds(grid.t_nodes, clip=True)
    x = grid.x_nodes
    counts = (np.searchsorted(x, bounds.x_hat_r) - np.searchsorted(x, bounds.x_hat_l))
    return int(np.min(counts))


def solve_forward(
    spec: ProblemSpec,
    grid: SpaceTimeGrid,
    init: Union[None, np.ndarray, Callable] = None,
    tol_per: Optional[float] = None,
    max_periods: int = MAX_PERIODS,
    min_periods: int = 1,
    strict: bool = True,
    newton_tol: float = NEWTON_TOL,
    newton_max: int = NEWTON_MAX,
    asym: Optional[AsymptoticSolution] = None,
) -> GridSolution:
    """March whole periods from ``init`` (default U0 at the first t node) to the periodic regime."""
    started = time.perf_counter()
    t_nodes = grid.t_nodes
    span = t_nodes[-1] - t_nodes[0]
    if abs(span - spec.period) > 1e-9 * spec.period:
        raise ValueError(f"t grid spans {span}, expected one period {spec.period}")
    if init is None or asym is not None:
        asym = asym or AsymptoticSolution(spec)
        cells = layer_cells(asym, grid)
        if cells < MIN_LAYER_CELLS:
            raise LayerUnresolved(f"only {cells} cells inside the transition layer")

    x = grid.x_nodes
    u_start = _initial_profile(spec, grid, init, asym)
    bc0 = spec.u0(t_nodes)
    bc1 = spec.u1(t_nodes)
    u_start[0], u_start[-1] = bc0[0], bc1[0]
    stepper = _Stepper(spec, x, newton_tol, newton_max)
    n_steps = len(t_nodes) - 1
    values = np.empty((n_steps + 1, len(x)))
    u_prev = None
    residual = np.inf
    tol = None
    for period in range(1, max_periods + 1):
        values[0] = u_start
        for n in range(n_steps):
            dt = t_nodes[n + 1] - t_nodes[n]
            u_n = values[n]
            if u_prev is None:
                c0, hist, guess = 1.0, -u_n[1:-1], u_n
            else:
                c0, hist = 1.5, -2.0 * u_n[1:-1] + 0.5 * u_prev[1:-1]
                guess = 2.0 * u_n - u_prev
            values[n + 1] = stepper.step(guess, t_nodes[n + 1], c0, hist, dt,
                                         (bc0[n + 1], bc1[n + 1]))
            u_prev = u_n
        residual = float(np.max(np.abs(values[-1] - values[0])))
        tol = tol_per if tol_per is not None else 1e-6 * float(np.max(np.abs(values)))
        log.debug("period %d: periodicity residual %.3e (tol %.3e)", period, residual, tol)
        if residual <= tol and period >= min_periods:
            break
        u_start = values[-1].copy()
    converged = residual <= tol
    if not converged and strict:
        raise NoPeriodicConvergence(max_periods, residual)
    return GridSolution(
        grid=grid,
        values=values.copy(),
        periodicity_residual=residual,
        periods=period,
        newton_iterations=stepper.iterations,
        tolerance=float(tol),
        converged=converged,
        runtime=time.perf_counter() - started,
        metadata={"mu": spec.mu, "nx": len(x), "nt": len(t_nodes)},
    )


def periodicity_residual(sol: GridSolution) -> float:
    return float(np.max(np.abs(sol.values[-1] - sol.values[0])))


class TransitionPoint(NamedTuple):
    position: float
    multiple: bool


def _sign_change_roots(xs, g):
    roots = []
    for i in range(len(xs) - 1):
        a, b = g[i], g[i + 1]
        if a == 0.0:
            roots.append(float(xs[i]))
        elif a * b < 0:
            roots.append(float(xs[i] - a * (xs[i + 1] - xs[i]) / (b - a)))
    if g[-1] == 0.0:
        roots.append(float(xs[-1]))
    return roots


def detect_transition(
    sol: GridSolution,
    outer: OuterBranches,
    t: float,
    bracket: Optional[tuple[float, float]] = None,
    asym: Optional[AsymptoticSolution] = None,
) -> TransitionPoint:
    """Leftmost zero of u - (phi_l + phi_r)/2 inside the layer bracket at time t.

    The bracket defaults to [x_hat_l(t), x_hat_r(t)] of the asymptotic
    solution, cut back to [0, 1]; u is piecewise linear in x and linear in t between levels.
    """
    if bracket is None:
        asym = asym or AsymptoticSolution(outer.spec)
        b = asym.layer_bounds(t, clip=True)
        bracket = (float(b.x_hat_l), float(b.x_hat_r))
    lo, hi = bracket
    x = sol.x
    u = sol.profile(t)
    inner = x[(x > lo) & (x < hi)]
    xs = np.concatenate([[lo], inner, [hi]])
    g = np.interp(xs, x, u) - outer.mid(xs, np.full_like(xs, t))
    roots = _sign_change_roots(xs, g)
    if not roots:
        raise NoSignChange(f"u - phi_mid keeps its sign on [{lo:.4g}, {hi:.4g}] at t={t:.6g}")
    return TransitionPoint(roots[0], len(roots) > 1)


@dataclass(frozen=True)
class TransitionTrack:
    t_nodes: np.ndarray
    x_tp: np.ndarray
    residuals: np.ndarray
    multiple: np.ndarray


def transition_track(sol: GridSolution, asym: AsymptoticSolution, times=None) -> TransitionTrack:
    times = sol.t if times is None else np.asarray(times, float)
    pts = [detect_transition(sol, asym.outer, tk, asym=asym) for tk in times]
    x_tp = np.array([p.position for p in pts])
    mid = asym.outer.mid(x_tp, times)
    u_at = np.array([np.interp(xp, sol.x, sol.profile(tk)) for xp, tk in zip(x_tp, times)])
    return TransitionTrack(times, x_tp, np.abs(u_at - mid), np.array([p.multiple for p in pts]))
