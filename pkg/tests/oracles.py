"""Independent reference computations used only by the tests."""
import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import BSpline


def dense_smoother(x, y, eps, refine=1):
    """Brute-force minimiser of mean((s(x_i) - y_i)^2) + eps * int s''^2.

    Works in the full cubic B-spline space whose knots are the data nodes
    (each interval split ``refine`` times), with the penalty assembled by Gauss-Legendre quadrature and the dense problem
    solved directly.  The natural smoothing spline lies in this space, so
    the minimisers coincide.  Returns (values at x, derivatives at x).
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    breaks = np.concatenate([np.linspace(a, b, refine + 1)[:-1] for a, b in zip(x[:-1], x[1:])] + [x[-1:]])
    knots = np.concatenate([[breaks[0]] * 3, breaks, [breaks[-1]] * 3])
    nb = len(knots) - 4
    eye = np.eye(nb)
    basis = [BSpline(knots, eye[i], 3, extrapolate=False) for i in range(nb)]
    second = [b.derivative(2) for b in basis]
    gx, gw = np.polynomial.legendre.leggauss(4)
    rows = []
    for a, b in zip(breaks[:-1], breaks[1:]):
        pts = 0.5 * (b - a) * gx + 0.5 * (a + b)
        w = 0.5 * (b - a) * gw
        d2 = np.array([np.nan_to_num(s(pts)) for s in second])
        rows.append((d2 * np.sqrt(w)).T)
    # int s''^2 = |P c|^2 with P built from the quadrature rows (G = P^T P)
    P = np.vstack(rows)
    B = BSpline.design_matrix(x, knots, 3).toarray()
    n = len(x)
    # Stacked least squares avoids squaring the condition number of the
    # dense normal matrix B^T B / n + eps * G; the minimiser is the same.
    M = np.vstack([B / np.sqrt(n), np.sqrt(eps) * P])
    rhs = np.concatenate([y / np.sqrt(n), np.zeros(len(P))])
    coef = np.linalg.lstsq(M, rhs, rcond=None)[0]
    s = BSpline(knots, coef, 3)
    return s(x), s.derivative()(x)


def inner_profile_ode(phi, q0, xi, rtol=1e-12, atol=1e-14):
    """Integrate dQ/dxi = -(Q^2 + 2 phi Q) / 2 from Q(0) = q0 to ``xi``."""
    if xi == 0:
        return q0
    sol = solve_ivp(lambda s, q: -0.5 * (q * q + 2.0 * phi * q), (0.0, xi), [q0],
                    method="DOP853", rtol=rtol, atol=atol)
    return float(sol.y[0, -1])
