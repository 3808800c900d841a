import numpy as np
import pytest
from scipy.integrate import trapezoid

from movingfront.asymptotics import AsymptoticSolution, OuterBranches, composite_u0
from movingfront.errors import LayerUnresolved, NoPeriodicConvergence, NoSignChange
from movingfront.forward import (
    GridSolution,
    detect_transition,
    numerical_flux,
    periodicity_residual,
    solve_forward,
    spatial_gradient,
    transition_track,
)
from movingfront.harness import forward_error, forward_solution
from movingfront.model import BoundaryData, ProblemSpec, SpaceTimeGrid, constant_trace, polynomial_in_x


def zero_field_spec(mu=0.02):
    return ProblemSpec(polynomial_in_x([0.0]), BoundaryData(constant_trace(-1), constant_trace(1), 1.0), mu)


def test_example1_forward(sol1, asym1):
    err = forward_error(sol1, asym1)
    assert 0.005 <= err <= 0.02
    assert sol1.converged
    assert sol1.periodicity_residual <= 1e-6 * np.max(np.abs(sol1.values))
    assert np.all(np.isfinite(sol1.values))


def test_example2_forward(sol2, asym2):
    err = forward_error(sol2, asym2, 4 * np.pi)
    assert 0.009 <= err <= 0.035


def test_boundary_columns_exact(sol2, spec2):
    np.testing.assert_array_equal(sol2.values[:, 0], spec2.u0(sol2.t))
    np.testing.assert_array_equal(sol2.values[:, -1], spec2.u1(sol2.t))


def test_periodicity_residual_function(sol1):
    assert periodicity_residual(sol1) == sol1.periodicity_residual


def test_steady_problem_converges_in_two_periods(spec1):
    grid = SpaceTimeGrid.uniform(801, 401, 2.0)
    one = solve_forward(spec1, grid, max_periods=1, strict=False)
    assert not one.converged
    two = solve_forward(spec1, grid, max_periods=2)
    assert two.periods == 2 and two.periodicity_residual <= two.tolerance


def test_wrong_init_relaxes(spec1, asym1):
    grid = SpaceTimeGrid.uniform(401, 201, 2.0)
    shifted = lambda x: composite_u0(asym1, x - 0.05, np.zeros_like(x))
    one = solve_forward(spec1, grid, init=shifted, max_periods=1, strict=False)
    five = solve_forward(spec1, grid, init=shifted, max_periods=5, tol_per=0.0, strict=False)
    assert one.periodicity_residual > five.periodicity_residual
    with pytest.raises(NoPeriodicConvergence):
        solve_forward(spec1, grid, init=shifted, max_periods=1)


def test_zero_field_front_is_odd():
    spec = zero_field_spec()
    sol = solve_forward(spec, SpaceTimeGrid.uniform(801, 101, 1.0),
                        init=lambda x: np.tanh((x - 0.5) / 0.04))
    outer = OuterBranches(spec)
    xc = detect_transition(sol, outer, 0.5, bracket=(0.3, 0.7)).position
    x = sol.x
    u = sol.values[-1]
    s = np.linspace(0, min(xc, 1 - xc), 200)
    left = np.interp(xc - s, x, u)
    right = np.interp(xc + s, x, u)
    np.testing.assert_allclose(left, -right, atol=1e-4)


def test_zero_field_flux_telescopes():
    spec = zero_field_spec()
    sol = solve_forward(spec, SpaceTimeGrid.uniform(401, 101, 1.0),
                        init=lambda x: np.tanh((x - 0.5) / 0.04))
    diffs = []
    for row in sol.values:
        flux, _, _ = numerical_flux(row, sol.x, spec.mu)
        diffs.append(flux[-1] - flux[0])
    assert abs(np.mean(diffs)) <= 1e-6
    mass = trapezoid(sol.values, sol.x, axis=1)
    assert abs(mass[-1] - mass[0]) <= 1e-6


def test_numerical_flux_jacobian(rng):
    x = np.sort(np.concatenate([[0, 1], rng.uniform(0, 1, 30)]))
    u = rng.normal(size=len(x)) * 3
    flux, dl, dr = numerical_flux(u, x, 0.02)
    h = 1e-7
    for i in (0, 5, 17):
        up = u.copy()
        up[i] += h
        fd = (numerical_flux(up, x, 0.02)[0] - flux) / h
        if i > 0:
            assert fd[i - 1] == pytest.approx(dr[i - 1], abs=1e-5)
        if i < len(x) - 1:
            assert fd[i] == pytest.approx(dl[i], abs=1e-5)


def test_spatial_gradient_fourth_order():
    errs = []
    for n in (51, 101):
        x = np.linspace(0, 1, n)
        g = spatial_gradient(np.sin(3 * x), x)
        errs.append(np.max(np.abs(g[2:-2] - 3 * np.cos(3 * x[2:-2]))))
    assert errs[0] / errs[1] > 12


def test_layer_unresolved(spec1):
    with pytest.raises(LayerUnresolved):
        solve_forward(spec1, SpaceTimeGrid.uniform(41, 21, 2.0))


def test_grid_rejects_wrong_span(spec1):
    with pytest.raises(ValueError):
        solve_forward(spec1, SpaceTimeGrid.uniform(801, 101, 1.0))


def test_detect_transition_on_u0(asym2):
    grid = SpaceTimeGrid.uniform(2001, 9, 2 * np.pi)
    X, T = np.meshgrid(grid.x_nodes, grid.t_nodes)
    values = composite_u0(asym2, X, T)
    sol = GridSolution(grid, values, 0.0, 0, 0, 0.0)
    for t in grid.t_nodes:
        tp = detect_transition(sol, asym2.outer, t, asym=asym2)
        assert tp.position == pytest.approx(float(asym2.x0(t)), abs=1e-7)
        assert not tp.multiple


def test_detect_transition_no_sign_change(sol1, asym1):
    with pytest.raises(NoSignChange):
        detect_transition(sol1, asym1.outer, 0.0, bracket=(0.1, 0.3))


def test_example2_track(sol2, asym2):
    track = transition_track(sol2, asym2)
    assert np.max(track.x_tp) == pytest.approx(0.442, abs=0.02)
    b = asym2.layer_bounds(track.t_nodes)
    assert np.all((track.x_tp > b.x_hat_l) & (track.x_tp < b.x_hat_r))
    assert np.max(track.residuals) <= 1e-10


@pytest.mark.slow
def test_grid_convergence(asym1):
    coarse = forward_error(forward_solution(1, (801, 401)), asym1)
    fine = forward_error(forward_solution(1, (1601, 801)), asym1)
    assert abs(fine - coarse) / fine < 0.1


def test_deterministic(spec1):
    grid = SpaceTimeGrid.uniform(401, 201, 2.0)
    a = solve_forward(spec1, grid)
    b = solve_forward(spec1, grid)
    np.testing.assert_array_equal(a.values, b.values)
