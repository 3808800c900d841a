"""Problem data for the periodic front equation and the assumption validators.

The equation handled throughout the package is

    mu * (u_xx - u_t) = -u * u_x + F(x, t) * u,   0 < x < 1,
    u(0, t) = u0(t),  u(1, t) = u1(t),  u(x, t) = u(x, t + T).

Coefficient fields and boundary traces are vectorised callables; all
assumption checks are done by sampling.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicHermiteSpline

from .errors import MixedSides

ArrayFn = Callable[..., np.ndarray]

# Fine grid used when a field has no closed-form antiderivative.
QUADRATURE_POINTS = 2049
DEFAULT_SAMPLES = 512
PERIODICITY_SAMPLES = 64


class FieldKind(enum.Enum):
    SPATIAL = "spatial"
    TEMPORAL = "temporal"
    GENERAL = "general"


@dataclass(frozen=True)
class CoefficientField:
    """A coefficient F(x, t) with a declared dependence pattern.

    ``func`` is always called as ``func(x, t)`` with broadcastable arrays.
    ``antiderivative(x, t)``, when given, must return the integral of F from
    0 to x; otherwise it is computed by composite Simpson quadrature.
    """

    func: ArrayFn
    kind: FieldKind = FieldKind.GENERAL
    antiderivative: Optional[ArrayFn] = None
    smoothness: int = 2
    label: str = ""

    def __call__(self, x, t):
        x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
        return np.asarray(self.func(x, t), float) * np.ones_like(x)

    def integral(self, x, t):
        """Integral of F(., t) over [0, x]."""
        x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
        if self.kind is FieldKind.TEMPORAL:
            return x * self(0.0, t)
        if self.antiderivative is not None:
            return np.asarray(self.antiderivative(x, t), float) * np.ones_like(x)
        return self._quadrature_integral(x, t)

    def tail_integral(self, x, t):
        """Integral of F(., t) over [x, 1]."""
        return self.integral(1.0, t) - self.integral(x, t)

    def _quadrature_integral(self, x, t):
        out = np.empty(x.shape)
        xs = np.linspace(0.0, 1.0, QUADRATURE_POINTS)
        if self.kind is FieldKind.SPATIAL:
            groups = [(np.ones(x.shape, bool), 0.0)]
        else:
            uniq, inverse = np.unique(t, return_inverse=True)
            inverse = inverse.reshape(t.shape)
            groups = [(inverse == k, tk) for k, tk in enumerate(uniq)]
        for mask, tk in groups:
            fx = self(xs, tk)
            cum = cumulative_simpson(fx, x=xs, initial=0.0)
            out[mask] = CubicHermiteSpline(xs, cum, fx)(x[mask])
        return out


def spatial_field(f: Callable, antiderivative: Optional[Callable] = None, label="") -> CoefficientField:
    anti = None if antiderivative is None else (lambda x, t: antiderivative(x))
    return CoefficientField(lambda x, t: f(x), FieldKind.SPATIAL, anti, label=label)


def temporal_field(g: Callable, label="") -> CoefficientField:
    return CoefficientField(lambda x, t: g(t), FieldKind.TEMPORAL, label=label)


def polynomial_in_x(coeffs: Sequence[float]) -> CoefficientField:
    """f(x) = c0 + c1 x + c2 x^2 + ... with an exact antiderivative."""
    c = np.asarray(coeffs, float)
    anti = np.concatenate([[0.0], c / np.arange(1, len(c) + 1)])
    return spatial_field(
        lambda x: np.polynomial.polynomial.polyval(x, c),
        lambda x: np.polynomial.polynomial.polyval(x, anti),
        label="poly_x " + " ".join(repr(float(v)) for v in c),
    )


def trig_in_t(c0: float, c1: float = 0.0, c2: float = 0.0) -> CoefficientField:
    """f(t) = c0 + c1 cos t + c2 sin t."""
    return temporal_field(trig_trace(c0, c1, c2), label=f"trig_t {c0!r} {c1!r} {c2!r}")


def trig_trace(c0: float, c1: float = 0.0, c2: float = 0.0) -> Callable:
    def trace(t):
        t = np.asarray(t, float)
        return c0 + c1 * np.cos(t) + c2 * np.sin(t)

    return trace


def constant_trace(c: float) -> Callable:
    return lambda t: np.full(np.shape(t), float(c))


@dataclass(frozen=True)
class BoundaryData:
    u0: Callable
    u1: Callable
    period: float
    periodic_rtol: float = 1e-12

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period}")
        t = np.linspace(0.0, self.period, PERIODICITY_SAMPLES, endpoint=False)
        for name, fn in (("u0", self.u0), ("u1", self.u1)):
            a, b = np.asarray(fn(t), float), np.asarray(fn(t + self.period), float)
            if not np.allclose(a, b, rtol=self.periodic_rtol, atol=self.periodic_rtol):
                raise ValueError(f"{name} is not {self.period}-periodic")
        gap = np.asarray(self.u1(t), float) - np.asarray(self.u0(t), float)
        if np.any(gap <= 0):
            raise ValueError("u1(t) - u0(t) must be positive")


@dataclass(frozen=True)
class ProblemSpec:
    field: CoefficientField
    boundary: BoundaryData
    mu: float
    theta: float = 0.5
    a_margin: Optional[float] = None
    horizon: Optional[float] = None
    name: str = ""

    def __post_init__(self):
        if not 0 < self.mu < 1:
            raise ValueError(f"mu must lie in (0, 1), got {self.mu}")
        if not 0 < self.theta < 1:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        if self.a_margin is not None and not 0 < self.a_margin < 0.5:
            raise ValueError(f"a must lie in (0, 0.5), got {self.a_margin}")
        if self.horizon is not None and not self.horizon > 0:
            raise ValueError("horizon must be positive")

    @property
    def period(self) -> float:
        return self.boundary.period

    @property
    def time_horizon(self) -> float:
        return self.period if self.horizon is None else self.horizon

    def with_mu(self, mu: float) -> "ProblemSpec":
        from dataclasses import replace

        return replace(self, mu=mu)

    def u0(self, t):
        return np.asarray(self.boundary.u0(np.asarray(t, float)), float)

    def u1(self, t):
        return np.asarray(self.boundary.u1(np.asarray(t, float)), float)


def field_is_periodic(field: CoefficientField, period: float, rtol: float = 1e-12,
                      samples: int = PERIODICITY_SAMPLES) -> bool:
    t = np.linspace(0.0, period, samples, endpoint=False)
    x = np.linspace(0.0, 1.0, samples)
    X, T = np.meshgrid(x, t)
    a, b = field(X, T), field(X, T + period)
    return bool(np.allclose(a, b, rtol=rtol, atol=rtol))


def field_respects_kind(field: CoefficientField, period: float = 1.0,
                        samples: int = PERIODICITY_SAMPLES) -> bool:
    """Check that spatial fields ignore t and temporal fields ignore x."""
    x = np.linspace(0.0, 1.0, samples)
    t = np.linspace(0.0, period, samples)
    X, T = np.meshgrid(x, t)
    vals = field(X, T)
    if field.kind is FieldKind.SPATIAL:
        return bool(np.all(vals == vals[0:1, :]))
    if field.kind is FieldKind.TEMPORAL:
        return bool(np.all(vals == vals[:, 0:1]))
    return True


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Tensor grid on [0, 1] x [0, T]; ``h`` and ``h1`` are recomputed from nodes."""

    x_nodes: np.ndarray
    t_nodes: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x_nodes, float)
        t = np.asarray(self.t_nodes, float)
        if x.ndim != 1 or t.ndim != 1 or len(x) < 3 or len(t) < 2:
            raise ValueError("grid needs at least 3 x nodes and 2 t nodes")
        if x[0] != 0.0 or x[-1] != 1.0:
            raise ValueError("x nodes must start at 0 and end at 1")
        if np.any(np.diff(x) <= 0) or np.any(np.diff(t) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        object.__setattr__(self, "x_nodes", x)
        object.__setattr__(self, "t_nodes", t)

    @classmethod
    def uniform(cls, nx: int, nt: int, period: float, t_start: float = 0.0) -> "SpaceTimeGrid":
        """``nx`` and ``nt`` count nodes, endpoints included."""
        return cls(np.linspace(0.0, 1.0, nx), np.linspace(t_start, t_start + period, nt))

    @property
    def h(self) -> float:
        return float(np.max(np.diff(self.x_nodes)))

    @property
    def h1(self) -> float:
        return float(np.max(np.diff(self.t_nodes)))

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.t_nodes), len(self.x_nodes)

    def refined(self, lo: float, hi: float, factor: int) -> "SpaceTimeGrid":
        """Subdivide every x cell that intersects [lo, hi] into ``factor`` pieces."""
        x = self.x_nodes
        pieces = [x[:1]]
        for a, b in zip(x[:-1], x[1:]):
            n = factor if (b > lo and a < hi) else 1
            pieces.append(np.linspace(a, b, n + 1)[1:])
        return SpaceTimeGrid(np.concatenate(pieces), self.t_nodes)


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    bound: float
    relation: str
    passed: bool


@dataclass(frozen=True)
class ValidationReport:
    name: str
    checks: tuple[Check, ...]
    notes: tuple[str, ...] = dc_field(default=())

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def summary(self) -> str:
        lines = [f"{self.name}: {'PASS' if self.passed else 'FAIL'}"]
        for c in self.checks:
            lines.append(
                f"  {c.name}: {c.value:.6g} {c.relation} {c.bound:.6g} "
                f"[{'ok' if c.passed else 'violated'}]"
            )
        lines.extend(f"  note: {n}" for n in self.notes)
        return "\n".join(lines)


def _time_samples(spec: ProblemSpec, n: int) -> np.ndarray:
    return np.linspace(0.0, spec.period, n)


def validate_assumption1(spec: ProblemSpec, sampling: int = DEFAULT_SAMPLES) -> ValidationReport:
    """Sign and separation conditions on the boundary traces."""
    t = _time_samples(spec, sampling)
    x = np.linspace(0.0, 1.0, sampling)
    X, T = np.meshgrid(x, t)
    head = spec.field.integral(X, T)
    tail = spec.field.tail_integral(X, T)
    u0, u1 = spec.u0(t), spec.u1(t)

    left_bound = min(0.0, -float(np.max(head)))
    right_bound = max(0.0, float(np.max(tail)))
    sep_bound = 2.0 * spec.mu ** spec.theta
    max_u0, min_u1, min_gap = float(np.max(u0)), float(np.min(u1)), float(np.min(u1 - u0))
    checks = (
        Check("max u0", max_u0, left_bound, "<", max_u0 < left_bound),
        Check("min u1", min_u1, right_bound, ">", min_u1 > right_bound),
        Check("min (u1 - u0)", min_gap, sep_bound, ">", min_gap > sep_bound),
    )
    notes = (
        f"max head integral {float(np.max(head)):.6g}",
        f"max tail integral {float(np.max(tail)):.6g}",
    )
    return ValidationReport("assumption 1", checks, notes)


def validate_assumption2(spec: ProblemSpec, t_samples: Optional[np.ndarray] = None) -> ValidationReport:
    """Existence of a transversal zero of I = phi_l^2 - phi_r^2 at every sampled t."""
    from .asymptotics import transition_roots, transition_slope

    if t_samples is None:
        t_samples = _time_samples(spec, DEFAULT_SAMPLES)
    roots, multi = [], []
    for tk in np.atleast_1d(np.asarray(t_samples, float)):
        found = transition_roots(spec, tk)
        if len(found) > 1:
            multi.append(float(tk))
        roots.append(found[0])
    roots = np.asarray(roots)
    slopes = transition_slope(spec, roots, np.atleast_1d(np.asarray(t_samples, float)))
    max_slope = float(np.max(slopes))
    inside = bool(np.all((roots > 0) & (roots < 1)))
    checks = (
        Check("max dI/dx at root", max_slope, 0.0, "<", max_slope < 0),
        Check("min root", float(np.min(roots)), 0.0, ">", inside),
        Check("max root", float(np.max(roots)), 1.0, "<", inside),
    )
    notes = ()
    if multi:
        notes = (f"multiple sign changes of I at {len(multi)} sampled times, first t={multi[0]:.6g}",)
    return ValidationReport("assumption 2", checks, notes)


def validate_assumption4(x_tp_samples, a: float) -> ValidationReport:
    """All layer positions strictly on one side of 1/2 with margin ``a``."""
    x = np.asarray(x_tp_samples, float).ravel()
    if np.any(x < 0.5) and np.any(x > 0.5):
        raise MixedSides(
            f"layer positions straddle 0.5 (min {x.min():.4g}, max {x.max():.4g})"
        )
    if np.all(x < 0.5) or np.all(x == 0.5):
        value, bound = float(np.max(x)), 0.5 - a
        ok = bool(np.all((x > 0) & (x < bound)))
        check = Check("max x_tp", value, bound, "<", ok)
    else:
        value, bound = float(np.min(x)), 0.5 + a
        ok = bool(np.all((x > bound) & (x < 1)))
        check = Check("min x_tp", value, bound, ">", ok)
    return ValidationReport("assumption 4", (check,))
