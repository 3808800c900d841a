"""Coefficient recovery: f(x) from a spatial slice, f(t) from boundary traces.

Both pipelines replace the PDE constraint by the zero-order relations of the
asymptotic solution.  For f(x) the outer branches satisfy d phi/dx = f, so
gradient data taken outside the layer are point samples of f.  For f(t) the
layer centre obeys f = (u0 + u1) / (1 - 2 x0).  In both cases the pointwise
estimates are smoothed by the penalised fit of :mod:`regularize` with the
discrepancy principle.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .asymptotics import AsymptoticSolution, LayerBounds
from .errors import LayerCoversDomain, NearSingularLayerPosition
from .forward import GridSolution, spatial_gradient, transition_track
from .metrics import relative_l2_error
from .regularize import PenalizedFitProblem, SmoothedFunction, choose_epsilon_discrepancy

ERROR_SAMPLES = 2001


class MeasurementKind(enum.Enum):
    SPATIAL_GRADIENT = "gradient"
    SPATIAL_VALUE = "value"
    TEMPORAL_TRIPLES = "triples"


_ARITY = {
    MeasurementKind.SPATIAL_GRADIENT: 1,
    MeasurementKind.SPATIAL_VALUE: 1,
    MeasurementKind.TEMPORAL_TRIPLES: 3,
}


@dataclass(frozen=True)
class MeasurementSet:
    """Noisy samples on a node grid.

    ``observations`` has shape (n,) for the spatial kinds and (n, 3) with
    columns (u0, u1, x_tp) for temporal triples.
    """

    kind: MeasurementKind
    nodes: np.ndarray
    observations: np.ndarray
    delta: float
    t0: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        nodes = np.asarray(self.nodes, float)
        obs = np.asarray(self.observations, float)
        arity = _ARITY[self.kind]
        expected = (len(nodes),) if arity == 1 else (len(nodes), arity)
        if obs.shape != expected:
            raise ValueError(f"{self.kind.value} observations need shape {expected}, got {obs.shape}")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        if self.kind is MeasurementKind.TEMPORAL_TRIPLES:
            xtp = obs[:, 2]
            if np.any((xtp <= 0) | (xtp >= 1)):
                raise ValueError("layer positions must lie in (0, 1)")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "observations", obs)


@dataclass(frozen=True)
class RecoveredCoefficient:
    function: SmoothedFunction
    epsilon_used: float
    prefit_nodes: np.ndarray
    prefit_values: np.ndarray
    excluded_interval: Optional[tuple[float, float]] = None
    relative_error: Optional[float] = None
    selection: str = "ok"

    def __call__(self, x):
        return self.function(x)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def synthesize_noise(clean, delta: float, seed) -> np.ndarray:
    """Multiplicative uniform noise: clean * (1 + delta * (2 * rand - 1))."""
    if not 0 <= delta < 1:
        raise ValueError("delta must lie in [0, 1)")
    clean = np.asarray(clean, float)
    if delta == 0:
        return clean.copy()
    r = _rng(seed).random(clean.shape)
    return (1.0 + delta * (2.0 * r - 1.0)) * clean


def repetition_rng(seed: int, repetition: int) -> np.random.Generator:
    """Independent stream for one Monte Carlo repetition."""
    return np.random.default_rng(np.random.SeedSequence([seed, repetition]))


def with_noise(meas: MeasurementSet, delta: float, seed) -> MeasurementSet:
    """Copy of a clean measurement set with fresh multiplicative noise."""
    obs = meas.observations
    noisy = synthesize_noise(obs.T, delta, seed).T if obs.ndim == 2 else synthesize_noise(obs, delta, seed)
    return MeasurementSet(meas.kind, meas.nodes, noisy, delta, t0=meas.t0,
                          seed=seed if isinstance(seed, int) else meas.seed)


def _relative_error(func, truth, domain):
    if truth is None:
        return None
    s = np.linspace(domain[0], domain[1], ERROR_SAMPLES)
    return relative_l2_error(func(s), truth(s), s)


# --- f(x) from a spatial slice ---------------------------------------------

def spatial_slice(sol: GridSolution, t0: float):
    """(u, du/dx) on the solver grid at time t0."""
    u = sol.profile(t0)
    return u, spatial_gradient(u, sol.x)


def ip1_measurements(
    sol: GridSolution,
    t0: float,
    k: int,
    delta: float,
    seed=0,
    kind: MeasurementKind = MeasurementKind.SPATIAL_GRADIENT,
) -> MeasurementSet:
    """Noisy gradient (or value) samples at x_i = i/k of the solution slice at t0."""
    nodes = np.linspace(0.0, 1.0, k + 1)
    u, ux = spatial_slice(sol, t0)
    clean = np.interp(nodes, sol.x, ux if kind is MeasurementKind.SPATIAL_GRADIENT else u)
    noisy = synthesize_noise(clean, delta, seed)
    return MeasurementSet(kind, nodes, noisy, delta, t0=t0,
                          seed=seed if isinstance(seed, int) else 0)


def exclusion_from_layer(layer: LayerBounds, nodes: np.ndarray) -> tuple[float, float]:
    """Layer band widened by one node spacing on each side."""
    h = float(np.max(np.diff(nodes)))
    return float(np.min(layer.x_hat_l)) - h, float(np.max(layer.x_hat_r)) + h


def exclusion_from_indices(nodes: np.ndarray, k_left: int, k_right: int) -> tuple[float, float]:
    """Open band that keeps indices 0..k_left and k_right..k."""
    return float(nodes[k_left]), float(nodes[k_right])


def multiplicative_noise_rms(values, delta: float) -> float:
    """Expected rms of clean * delta * (2 * rand - 1) given the observed values."""
    return delta * float(np.sqrt(np.mean(np.asarray(values, float) ** 2) / 3.0))


def _smooth_side(nodes, values, delta, domain):
    fit_problem = PenalizedFitProblem(nodes, values, delta, domain)
    return choose_epsilon_discrepancy(fit_problem)[1]


def ip1_recover(
    meas: MeasurementSet,
    layer: Optional[LayerBounds] = None,
    excluded: Optional[tuple[float, float]] = None,
    truth: Optional[Callable] = None,
    value_target: str = "relative",
) -> RecoveredCoefficient:
    """Recover f(x) from one time slice of gradient or value data.

    Nodes strictly inside ``excluded`` are dropped; by default the band is
    the asymptotic layer [x_hat_l, x_hat_r] at t0 widened by one node.

    Value data are first smoothed on each side of the band and
    differentiated.  With ``value_target="relative"`` that smoothing aims at
    the rms a multiplicative noise of level delta would leave on the
    observed values; ``"absolute"`` aims at delta itself.  The final fit of
    f always targets delta.
    """
    if meas.kind is MeasurementKind.TEMPORAL_TRIPLES:
        raise ValueError("f(x) recovery needs spatial measurements")
    nodes, obs = meas.nodes, meas.observations
    if excluded is None:
        if layer is None:
            raise ValueError("need either layer bounds or an explicit excluded interval")
        excluded = exclusion_from_layer(layer, nodes)
    lo, hi = excluded
    left = nodes <= lo
    right = nodes >= hi
    if np.count_nonzero(left) < 4 or np.count_nonzero(right) < 4:
        raise LayerCoversDomain(f"too few nodes outside the excluded band [{lo:.4g}, {hi:.4g}]")

    if meas.kind is MeasurementKind.SPATIAL_VALUE:
        omega = np.empty(len(nodes))
        for mask, dom in ((left, (0.0, lo)), (right, (hi, 1.0))):
            xs_side, us_side = nodes[mask], obs[mask]
            target = (multiplicative_noise_rms(us_side, meas.delta)
                      if value_target == "relative" else meas.delta)
            dom = (min(dom[0], xs_side[0]), max(dom[1], xs_side[-1]))
            side = _smooth_side(xs_side, us_side, target, dom)
            omega[mask] = side.derivative(nodes[mask])
    else:
        omega = obs
    keep = left | right
    xs, ws = nodes[keep], omega[keep]
    fit = _smooth_side(xs, ws, meas.delta, (0.0, 1.0))
    return RecoveredCoefficient(
        function=fit,
        epsilon_used=fit.epsilon,
        prefit_nodes=xs,
        prefit_values=ws,
        excluded_interval=(lo, hi),
        relative_error=_relative_error(fit, truth, (0.0, 1.0)),
        selection=fit.selection,
    )


# --- f(t) from boundary traces and layer positions --------------------------

def ip2_measurements(
    sol: GridSolution,
    asym: AsymptoticSolution,
    k: int,
    delta: float,
    seed=0,
    horizon: Optional[float] = None,
) -> MeasurementSet:
    """Noisy (u0, u1, x_tp) at t_i = i * horizon / k, x_tp detected on ``sol``."""
    spec = asym.spec
    horizon = spec.time_horizon if horizon is None else horizon
    nodes = np.linspace(0.0, horizon, k + 1)
    track = transition_track(sol, asym, nodes)
    clean = np.column_stack([spec.u0(nodes), spec.u1(nodes), track.x_tp])
    rng = _rng(seed)
    noisy = synthesize_noise(clean.T, delta, rng).T if delta > 0 else clean
    return MeasurementSet(MeasurementKind.TEMPORAL_TRIPLES, nodes, noisy, delta,
                          seed=seed if isinstance(seed, int) else 0)


def ip2_pointwise(meas: MeasurementSet, a: float, drop: bool = False):
    """f_i = (u0_i + u1_i) / (1 - 2 x_tp_i).

    Nodes with |1 - 2 x_tp_i| <= a raise NearSingularLayerPosition, or are
    dropped when ``drop`` is set.  Returns (nodes, values).
    """
    if meas.kind is not MeasurementKind.TEMPORAL_TRIPLES:
        raise ValueError("f(t) recovery needs temporal triples")
    u0, u1, xtp = meas.observations.T
    denom = 1.0 - 2.0 * xtp
    bad = np.abs(denom) <= a
    if np.any(bad) and not drop:
        i = int(np.argmax(bad))
        raise NearSingularLayerPosition(i, float(abs(denom[i])))
    keep = ~bad
    return meas.nodes[keep], (u0[keep] + u1[keep]) / denom[keep]


def ip2_recover(
    meas: MeasurementSet,
    a: float,
    truth: Optional[Callable] = None,
    domain: Optional[tuple[float, float]] = None,
) -> RecoveredCoefficient:
    """Smooth the pointwise estimates over the time window with the discrepancy rule."""
    nodes, values = ip2_pointwise(meas, a, drop=True)
    if domain is None:
        domain = (float(meas.nodes[0]), float(meas.nodes[-1]))
    fit = _smooth_side(nodes, values, meas.delta, domain)
    return RecoveredCoefficient(
        function=fit,
        epsilon_used=fit.epsilon,
        prefit_nodes=nodes,
        prefit_values=values,
        relative_error=_relative_error(fit, truth, domain),
        selection=fit.selection,
    )
