"""Zero-order matched asymptotic solution with an interior transition layer.

Away from the layer the solution follows one of two outer branches,

    phi_l(x, t) = u0(t) + int_0^x F,     phi_r(x, t) = u1(t) - int_x^1 F,

and the layer centre x0(t) is the zero of I = phi_l^2 - phi_r^2.  Inside the
layer, in the stretched variable xi = (x - x0(t)) / mu, the inner correction

    Q(xi, t) = K1 / (1 - K2 exp(phi * xi)),   K1 = -2 phi,

solves dQ/dxi = -(Q^2 + 2 phi Q) / 2 with phi the branch value at x0(t).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import AmbiguousRoot, BoundsOutOfDomain, NoRootFound, WrongSide
from .model import FieldKind, ProblemSpec

ROOT_SCAN = 512
ROOT_RTOL = 1e-12
X0_CACHE_NODES = 256


@dataclass(frozen=True)
class OuterBranches:
    """phi_l and phi_r for one problem; both are exact given the field integrals."""

    spec: ProblemSpec

    def left(self, x, t):
        return self.spec.u0(t) + self.spec.field.integral(x, t)

    def right(self, x, t):
        return self.spec.u1(t) - self.spec.field.tail_integral(x, t)

    def mid(self, x, t):
        return 0.5 * (self.left(x, t) + self.right(x, t))

    def slope(self, x, t):
        """Common x-derivative of both branches, i.e. F itself."""
        return self.spec.field(x, t)


def outer_solutions(spec: ProblemSpec) -> OuterBranches:
    return OuterBranches(spec)


def _imbalance(spec: ProblemSpec, x, t):
    outer = OuterBranches(spec)
    return outer.left(x, t) ** 2 - outer.right(x, t) ** 2


def transition_slope(spec: ProblemSpec, x, t):
    """dI/dx = 2 F (phi_l - phi_r)."""
    outer = OuterBranches(spec)
    return 2.0 * spec.field(x, t) * (outer.left(x, t) - outer.right(x, t))


def _polish(spec, x, t, scale):
    for _ in range(3):
        r = float(_imbalance(spec, x, t))
        if abs(r) <= ROOT_RTOL * scale:
            break
        d = float(transition_slope(spec, x, t))
        if d == 0:
            break
        step = x - r / d
        if not 0.0 < step < 1.0:
            break
        x = step
    return x


def transition_roots(spec: ProblemSpec, t: float, n_scan: int = ROOT_SCAN) -> list[float]:
    """All zeros of I(., t) in (0, 1), located by sign changes on a scan grid."""
    t = float(t)
    xs = np.linspace(0.0, 1.0, n_scan + 1)
    vals = _imbalance(spec, xs, np.full_like(xs, t))
    roots = []
    for i in range(n_scan):
        a, b = vals[i], vals[i + 1]
        if a == 0.0 and 0 < i:
            roots.append(float(xs[i]))
        elif a * b < 0:
            fn = lambda x: float(_imbalance(spec, x, t))
            x = brentq(fn, xs[i], xs[i + 1], xtol=1e-15, maxiter=200)
            outer = OuterBranches(spec)
            scale = max(float(outer.left(x, t)) ** 2, float(outer.right(x, t)) ** 2, 1.0)
            roots.append(_polish(spec, x, t, scale))
    if not roots:
        raise NoRootFound(f"I(x, t={t:.6g}) has no sign change on (0, 1)")
    return roots


def transition_curve_zero(spec: ProblemSpec, t) -> np.ndarray:
    """Layer centre x0(t); closed form when F depends on t only."""
    t_arr = np.asarray(t, float)
    if spec.field.kind is FieldKind.TEMPORAL:
        f = spec.field(0.0, t_arr)
        x0 = -(spec.u0(t_arr) + spec.u1(t_arr) - f) / (2.0 * f)
        if np.any((x0 <= 0) | (x0 >= 1)):
            raise NoRootFound("closed-form layer centre leaves (0, 1)")
        return x0
    out = np.empty(t_arr.shape)
    for idx, tk in np.ndenumerate(t_arr):
        roots = transition_roots(spec, tk)
        if len(roots) > 1:
            raise AmbiguousRoot(
                f"I(x, t={tk:.6g}) has {len(roots)} zeros", brackets=roots
            )
        out[idx] = roots[0]
    return out


def _is_autonomous(spec: ProblemSpec) -> bool:
    t = np.linspace(0.0, spec.period, 16)
    if spec.field.kind is not FieldKind.SPATIAL:
        return False
    return bool(np.ptp(spec.u0(t)) == 0 and np.ptp(spec.u1(t)) == 0)


@dataclass(frozen=True)
class LayerBounds:
    x_hat_l: np.ndarray
    x_hat_r: np.ndarray

    @property
    def width(self):
        return self.x_hat_r - self.x_hat_l


class AsymptoticSolution:
    """Immutable zero-order approximation U0 for one problem.

    x0(t) is exact for t-only fields and otherwise cached on a uniform
    t-grid over one period and interpolated with a periodic cubic spline.
    """

    def __init__(self, spec: ProblemSpec, cache_nodes: int = X0_CACHE_NODES):
        self.spec = spec
        self.mu = spec.mu
        self.outer = OuterBranches(spec)
        self._closed_form = spec.field.kind is FieldKind.TEMPORAL
        self._constant_x0: Optional[float] = None
        self._spline = None
        if self._closed_form:
            self.t_cache = np.empty(0)
            self.x0_cache = np.empty(0)
        elif _is_autonomous(spec):
            self._constant_x0 = float(transition_curve_zero(spec, 0.0))
            self.t_cache = np.array([0.0])
            self.x0_cache = np.array([self._constant_x0])
        else:
            self.t_cache = np.linspace(0.0, spec.period, cache_nodes + 1)
            x0 = transition_curve_zero(spec, self.t_cache[:-1])
            self.x0_cache = np.append(x0, x0[0])
            self._spline = CubicSpline(self.t_cache, self.x0_cache, bc_type="periodic")

    def x0(self, t):
        t = np.asarray(t, float)
        if self._closed_form:
            return transition_curve_zero(self.spec, t)
        if self._constant_x0 is not None:
            return np.full(t.shape, self._constant_x0)
        return self._spline(np.mod(t, self.spec.period))

    def x0_derivative(self, t, dt: float = 1e-5):
        t = np.asarray(t, float)
        return (self.x0(t + dt) - self.x0(t - dt)) / (2 * dt)

    def branch_values(self, t):
        """(phi_l, phi_r) evaluated on the layer centre x0(t)."""
        x0 = self.x0(t)
        return self.outer.left(x0, t), self.outer.right(x0, t)

    def phi_mid(self, t):
        pl, pr = self.branch_values(t)
        return 0.5 * (pl + pr)

    def coefficients(self, side: str, t):
        """(phi, K1, K2) of the inner profile on ``side`` at time t."""
        pl, pr = self.branch_values(t)
        if side == "left":
            return pl, -2.0 * pl, (pr + 3.0 * pl) / (pr - pl)
        if side == "right":
            return pr, -2.0 * pr, (pl + 3.0 * pr) / (pl - pr)
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")

    def layer_bounds(self, t, clip: bool = False) -> LayerBounds:
        return layer_bounds(self, t, clip)


def _profile(phi, k1, k2, xi):
    # exp(-phi*xi) lies in (0, 1] on the admissible side, so no overflow.
    z = np.exp(-phi * xi)
    return k1 * z / (z - k2)


def inner_correction(asym: AsymptoticSolution, side: str, xi, t):
    """Inner correction Q0 on ``side``; left needs xi <= 0, right xi >= 0."""
    xi = np.asarray(xi, float)
    if side == "left" and np.any(xi > 0):
        raise WrongSide("left inner correction needs xi <= 0")
    if side == "right" and np.any(xi < 0):
        raise WrongSide("right inner correction needs xi >= 0")
    phi, k1, k2 = asym.coefficients(side, t)
    return _profile(phi, k1, k2, xi)


def inner_correction_derivative(asym: AsymptoticSolution, side: str, xi, t):
    """dQ0/dxi from the inner equation itself."""
    q = inner_correction(asym, side, xi, t)
    phi, _, _ = asym.coefficients(side, t)
    return -0.5 * (q * q + 2.0 * phi * q)


def composite_u0(asym: AsymptoticSolution, x, t):
    """U0(x, t); the left branch is used at x == x0(t)."""
    x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
    x0 = asym.x0(t)
    xi = (x - x0) / asym.mu
    left = x <= x0
    out = np.empty(x.shape)
    for side, mask in (("left", left), ("right", ~left)):
        if not np.any(mask):
            continue
        phi, k1, k2 = asym.coefficients(side, t[mask])
        branch = asym.outer.left if side == "left" else asym.outer.right
        out[mask] = branch(x[mask], t[mask]) + _profile(phi, k1, k2, xi[mask])
    return out


def layer_bounds(asym: AsymptoticSolution, t, clip: bool = False) -> LayerBounds:
    """Points where |Q0| has decayed to mu^2 on each side of x0(t).

    Bounds outside [0, 1] raise BoundsOutOfDomain unless ``clip`` is set,
    in which case they are cut back to the interval.
    """
    t = np.asarray(t, float)
    x0 = asym.x0(t)
    mu2 = asym.mu ** 2
    hats = []
    for side, target_sign in (("left", 1.0), ("right", -1.0)):
        phi, k1, k2 = asym.coefficients(side, t)
        target = target_sign * mu2
        ratio = (1.0 - k1 / target) / k2
        if np.any(ratio <= 1.0):
            raise BoundsOutOfDomain(f"mu^2 exceeds the layer amplitude on the {side}")
        hats.append(x0 + asym.mu * np.log(ratio) / phi)
    xl, xr = hats
    if clip:
        return LayerBounds(np.clip(xl, 0.0, 1.0), np.clip(xr, 0.0, 1.0))
    if np.any(xl < 0) or np.any(xr > 1):
        raise BoundsOutOfDomain(
            f"layer bounds [{np.min(xl):.4g}, {np.max(xr):.4g}] leave [0, 1]"
        )
    return LayerBounds(xl, xr)
