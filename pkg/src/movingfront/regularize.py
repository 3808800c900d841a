"""Second-derivative penalised least squares with discrepancy-principle selection.

For nodes x_0 < ... < x_k and data y_i the functional

    (1/(k+1)) * sum_i (s(x_i) - y_i)^2 + eps * int s''(x)^2 dx

is minimised over C^2 functions by the natural cubic smoothing spline with
knots at the nodes.  It is computed with Reinsch's banded formulation: with
lam = (k+1) * eps, the interior second derivatives gamma solve

    (R + lam * Q^T Q) gamma = Q^T y,      s = y - lam * Q gamma,

where Q is the (k+1) x (k-1) second-difference matrix and R the tridiagonal
Gram matrix of the hat functions.  Beyond the end nodes the minimiser is
linear, which is how the fit is extended over the rest of ``domain``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import PPoly
from scipy.linalg import LinAlgError, solveh_banded

from .errors import InsufficientData, OutOfDomain, SingularSystem

log = logging.getLogger(__name__)

EPS_MIN = 1e-14
EPS_MAX = 1e14
EPS_FLOOR = 1e-12
BISECTION_STEPS = 60
DISCREPANCY_RTOL = 0.01


@dataclass(frozen=True)
class PenalizedFitProblem:
    nodes: np.ndarray
    data: np.ndarray
    delta: float = 0.0
    domain: Optional[tuple[float, float]] = None

    def __post_init__(self):
        x = np.asarray(self.nodes, float)
        y = np.asarray(self.data, float)
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError("nodes and data must be 1-d arrays of equal length")
        if len(x) < 4:
            raise InsufficientData("penalised fit needs at least 4 nodes")
        if not np.all(np.isfinite(y)):
            raise ValueError("data must be finite")
        if np.any(np.diff(x) < 0):
            raise ValueError("nodes must be increasing")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        dom = self.domain if self.domain is not None else (float(x[0]), float(x[-1]))
        if dom[0] > x[0] or dom[1] < x[-1]:
            raise ValueError("domain must contain every node")
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "data", y)
        object.__setattr__(self, "domain", (float(dom[0]), float(dom[1])))


class SmoothedFunction:
    """Natural cubic spline on ``domain``, linear outside the node range."""

    def __init__(self, nodes, values, second, domain, epsilon, rms_residual, selection="fixed"):
        self.nodes = np.asarray(nodes, float)
        self.values = np.asarray(values, float)
        self.second = np.asarray(second, float)
        self.domain = domain
        self.epsilon = float(epsilon)
        self.rms_residual = float(rms_residual)
        self.selection = selection
        x, g, m = self.nodes, self.values, self.second
        h = np.diff(x)
        coeffs = np.vstack([
            (m[1:] - m[:-1]) / (6.0 * h),
            m[:-1] / 2.0,
            (g[1:] - g[:-1]) / h - h * (2.0 * m[:-1] + m[1:]) / 6.0,
            g[:-1],
        ])
        self._pp = PPoly(coeffs, x)
        self._dpp = self._pp.derivative()
        self._slopes = (float(self._dpp(x[0])), float(self._dpp(x[-1])))

    def _check(self, x):
        lo, hi = self.domain
        tol = 1e-12 * max(1.0, abs(lo), abs(hi))
        if np.any(x < lo - tol) or np.any(x > hi + tol):
            raise OutOfDomain(f"evaluation outside [{lo}, {hi}]")

    def __call__(self, x):
        x = np.asarray(x, float)
        self._check(x)
        a, b = self.nodes[0], self.nodes[-1]
        out = self._pp(np.clip(x, a, b))
        out = np.where(x < a, self.values[0] + self._slopes[0] * (x - a), out)
        out = np.where(x > b, self.values[-1] + self._slopes[1] * (x - b), out)
        return out

    def derivative(self, x):
        x = np.asarray(x, float)
        self._check(x)
        a, b = self.nodes[0], self.nodes[-1]
        out = self._dpp(np.clip(x, a, b))
        out = np.where(x < a, self._slopes[0], out)
        return np.where(x > b, self._slopes[1], out)

    def penalty(self) -> float:
        """int s''^2 over the domain (s'' is piecewise linear and zero outside the nodes)."""
        h = np.diff(self.nodes)
        m = self.second
        return float(np.sum(h * (m[:-1] ** 2 + m[:-1] * m[1:] + m[1:] ** 2) / 3.0))


def _reinsch(x, y, lam):
    h = np.diff(x)
    if np.any(h <= 0):
        raise SingularSystem("penalised fit needs distinct nodes")
    n = len(x)
    a = 1.0 / h[:-1]
    d = 1.0 / h[1:]
    b = -a - d
    # Upper banded storage of the symmetric pentadiagonal R + lam Q^T Q.
    m = n - 2
    ab = np.zeros((3, m))
    ab[2] = (h[:-1] + h[1:]) / 3.0 + lam * (a * a + b * b + d * d)
    ab[1, 1:] = h[1:-1] / 6.0 + lam * (b[:-1] * a[1:] + d[:-1] * b[1:])
    ab[0, 2:] = lam * d[:-2] * a[2:]
    rhs = a * y[:-2] + b * y[1:-1] + d * y[2:]
    try:
        gamma = solveh_banded(ab, rhs)
    except LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    q_gamma = np.zeros(n)
    q_gamma[:-2] += a * gamma
    q_gamma[1:-1] += b * gamma
    q_gamma[2:] += d * gamma
    values = y - lam * q_gamma
    second = np.concatenate([[0.0], gamma, [0.0]])
    return values, second


def fit_penalized(problem: PenalizedFitProblem, epsilon: float) -> SmoothedFunction:
    """Exact minimiser of the penalised functional for a fixed ``epsilon``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    x, y = problem.nodes, problem.data
    values, second = _reinsch(x, y, len(x) * epsilon)
    rms = math.sqrt(float(np.mean((values - y) ** 2)))
    return SmoothedFunction(x, values, second, problem.domain, epsilon, rms)


def misfit(problem: PenalizedFitProblem, epsilon: float) -> float:
    return fit_penalized(problem, epsilon).rms_residual


def choose_epsilon_discrepancy(problem: PenalizedFitProblem) -> tuple[float, SmoothedFunction]:
    """Pick eps so that the rms misfit equals delta (bisection in log eps).

    With delta = 0 a fixed floor eps is used.  When delta lies outside the
    misfit range reachable on [EPS_MIN, EPS_MAX] the nearer endpoint is
    returned and ``selection`` is set to "low" or "high".
    """
    delta = problem.delta
    if delta == 0:
        fit = fit_penalized(problem, EPS_FLOOR)
        return EPS_FLOOR, fit
    lo_fit = fit_penalized(problem, EPS_MIN)
    if lo_fit.rms_residual >= delta * (1 - DISCREPANCY_RTOL):
        lo_fit.selection = "ok" if lo_fit.rms_residual <= delta * (1 + DISCREPANCY_RTOL) else "low"
        if lo_fit.selection == "low":
            log.warning("discrepancy target %.3e below reachable misfit %.3e", delta, lo_fit.rms_residual)
        return EPS_MIN, lo_fit
    hi_fit = fit_penalized(problem, EPS_MAX)
    if hi_fit.rms_residual <= delta * (1 + DISCREPANCY_RTOL):
        hi_fit.selection = "ok" if hi_fit.rms_residual >= delta * (1 - DISCREPANCY_RTOL) else "high"
        if hi_fit.selection == "high":
            log.warning("discrepancy target %.3e above reachable misfit %.3e", delta, hi_fit.rms_residual)
        return EPS_MAX, hi_fit

    lo, hi = math.log(EPS_MIN), math.log(EPS_MAX)
    best = None
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        fit = fit_penalized(problem, math.exp(mid))
        r = fit.rms_residual
        if best is None or abs(r - delta) < abs(best.rms_residual - delta):
            best = fit
        if abs(r - delta) <= 1e-3 * delta:
            break
        if r < delta:
            lo = mid
        else:
            hi = mid
    best.selection = "ok" if abs(best.rms_residual - delta) <= DISCREPANCY_RTOL * delta else "low"
    return best.epsilon, best


def differentiate(sf: SmoothedFunction, x):
    return sf.derivative(x)
