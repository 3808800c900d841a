import math

import numpy as np
import pytest

from movingfront.errors import InsufficientData, OutOfDomain, SingularSystem
from movingfront.regularize import (
    EPS_FLOOR,
    PenalizedFitProblem,
    choose_epsilon_discrepancy,
    differentiate,
    fit_penalized,
    misfit,
)

from oracles import dense_smoother


def random_instance(rng, kmax=20):
    n = int(rng.integers(4, kmax + 1))
    x = np.sort(rng.uniform(0, 1, n))
    while np.min(np.diff(x)) < 1e-3:
        x = np.sort(rng.uniform(0, 1, n))
    return x, rng.normal(size=n)


def test_interpolates_cubic_for_tiny_eps():
    x = np.linspace(-1, 2, 15)
    y = x ** 3 - 2 * x + 1
    fit = fit_penalized(PenalizedFitProblem(x, y), 1e-14)
    np.testing.assert_allclose(fit(x), y, atol=1e-8)


def test_huge_eps_gives_regression_line(rng):
    x = np.sort(rng.uniform(0, 1, 12))
    y = rng.normal(size=12)
    fit = fit_penalized(PenalizedFitProblem(x, y), 1e14)
    slope, intercept = np.polyfit(x, y, 1)
    np.testing.assert_allclose(fit(x), slope * x + intercept, atol=1e-8)
    np.testing.assert_allclose(differentiate(fit, x), slope, atol=1e-8)
    assert fit.penalty() < 1e-16


def test_matches_dense_oracle_twelve_nodes(rng):
    x, y = np.sort(rng.uniform(0, 1, 12)), rng.normal(size=12)
    fit = fit_penalized(PenalizedFitProblem(x, y), 0.3)
    values, slopes = dense_smoother(x, y, 0.3, refine=16)
    np.testing.assert_allclose(fit(x), values, atol=1e-7)
    np.testing.assert_allclose(fit.derivative(x), slopes, atol=1e-7)


def test_fit_is_the_minimiser(rng):
    x, y = random_instance(rng)
    eps = 1e-3
    fit = fit_penalized(PenalizedFitProblem(x, y), eps)

    def objective(values, second):
        from movingfront.regularize import SmoothedFunction

        s = SmoothedFunction(x, values, second, (x[0], x[-1]), eps, 0.0)
        return np.mean((values - y) ** 2) + eps * s.penalty()

    best = objective(fit.values, fit.second)
    # perturbing the data through the same solver moves away from the optimum
    for _ in range(5):
        other = fit_penalized(PenalizedFitProblem(x, y + 1e-3 * rng.normal(size=len(x))), eps)
        assert objective(other.values, other.second) >= best - 1e-15


def test_derivative_matches_finite_differences(rng):
    x, y = random_instance(rng)
    fit = fit_penalized(PenalizedFitProblem(x, y), 1e-4)
    s = np.linspace(x[0] + 1e-4, x[-1] - 1e-4, 23)
    h = 1e-5
    fd = (fit(s + h) - fit(s - h)) / (2 * h)
    np.testing.assert_allclose(differentiate(fit, s), fd, atol=1e-6 * max(1, np.max(np.abs(fd))))


def test_quadratic_derivative():
    # natural end conditions disturb x^2 only within a few nodes of the ends
    x = np.linspace(0, 1, 201)
    fit = fit_penalized(PenalizedFitProblem(x, x ** 2), 1e-14)
    s = np.array([0.1, 0.3, 0.5, 0.7, 0.9])
    np.testing.assert_allclose(differentiate(fit, s), 2 * s, atol=1e-6)


def test_linear_extension_and_domain():
    x = np.linspace(0.2, 0.8, 10)
    fit = fit_penalized(PenalizedFitProblem(x, np.sin(x), domain=(0.0, 1.0)), 1e-6)
    assert fit(0.0) == pytest.approx(fit(0.2) - 0.2 * fit.derivative(0.2))
    assert fit.derivative(0.95) == pytest.approx(fit.derivative(0.8))
    with pytest.raises(OutOfDomain):
        fit(1.1)
    with pytest.raises(OutOfDomain):
        differentiate(fit, -0.1)


def test_problem_validation():
    with pytest.raises(InsufficientData):
        PenalizedFitProblem(np.arange(3.0), np.zeros(3))
    with pytest.raises(ValueError):
        PenalizedFitProblem(np.arange(5.0), np.array([0, 1, np.nan, 0, 0]))
    with pytest.raises(ValueError):
        PenalizedFitProblem(np.arange(5.0), np.zeros(5), delta=-1)
    with pytest.raises(ValueError):
        PenalizedFitProblem(np.arange(5.0), np.zeros(5), domain=(1, 4))
    with pytest.raises(SingularSystem):
        fit_penalized(PenalizedFitProblem(np.array([0, 1, 1, 2, 3.0]), np.zeros(5)), 1.0)
    with pytest.raises(ValueError):
        fit_penalized(PenalizedFitProblem(np.arange(5.0), np.zeros(5)), 0.0)


def test_residual_monotone_in_eps(rng):
    eps = np.logspace(-10, 10, 41)
    for _ in range(50):
        x, y = random_instance(rng)
        prob = PenalizedFitProblem(x, y)
        r = np.array([misfit(prob, e) for e in eps])
        # roundoff allowance on the flat large-eps plateau
        assert np.all(np.diff(r) >= -1e-10 * (1 + r[:-1]))


def test_discrepancy_identity(rng):
    x = np.linspace(0, 1, 60)
    clean = np.sin(2 * np.pi * x) + 2
    for delta in (1e-3, 1e-2, 5e-2):
        y = clean + delta * np.sqrt(3) * (2 * rng.random(60) - 1)
        eps, fit = choose_epsilon_discrepancy(PenalizedFitProblem(x, y, delta))
        assert fit.selection == "ok"
        assert abs(fit.rms_residual - delta) / delta <= 0.01
        assert fit.epsilon == eps


def test_discrepancy_noiseless_limit():
    x = np.linspace(0, 1, 30)
    y = np.exp(x)
    eps, fit = choose_epsilon_discrepancy(PenalizedFitProblem(x, y, 1e-8))
    assert eps < 1e-6
    np.testing.assert_allclose(fit(x), y, atol=1e-7)
    eps0, fit0 = choose_epsilon_discrepancy(PenalizedFitProblem(x, y, 0.0))
    assert eps0 == EPS_FLOOR


def test_discrepancy_unreachable_flags(rng):
    x = np.linspace(0, 1, 20)
    y = 3 * x + 1
    _, fit = choose_epsilon_discrepancy(PenalizedFitProblem(x, y, 0.5))
    assert fit.selection == "high"


def test_discrepancy_on_example1_gradient_data(sol1, asym1):
    from movingfront.inverse import ip1_measurements, ip1_recover

    meas = ip1_measurements(sol1, 1.0, 200, 0.01, seed=3)
    rec = ip1_recover(meas, layer=asym1.layer_bounds(1.0))
    assert rec.selection == "ok"
    assert abs(rec.function.rms_residual - 0.01) / 0.01 <= 0.01


def test_scaling_equivariance(rng):
    x, y = random_instance(rng)
    eps, fit = choose_epsilon_discrepancy(PenalizedFitProblem(x, y, 0.05))
    c = 7.5
    eps_c, fit_c = choose_epsilon_discrepancy(PenalizedFitProblem(x, c * y, c * 0.05))
    s = np.linspace(x[0], x[-1], 17)
    if fit.selection == "ok":
        assert math.isclose(eps, eps_c, rel_tol=1e-10)
    fixed = fit_penalized(PenalizedFitProblem(x, c * y), eps)
    np.testing.assert_allclose(fixed(s), c * fit(s), rtol=1e-10, atol=1e-12)
