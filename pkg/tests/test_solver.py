import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dirinf.experiment import random_fourier
from dirinf.grid import PolarField, PolarGrid
from dirinf.operators import p_laplace_operator
from dirinf.props import energy_gradient_suite, maximum_principle_suite, rotation_suite, shift_suite
from dirinf.solver import (EnergyDiscretization, SolverParams, boundary_trace, comparison_test, discrete_residual,
                           solve_dirichlet)

from oracles import annulus_errors, catenoid_radial, harmonic_radial

SMALL = PolarGrid.disk(16, 32, 3.0)


@pytest.fixture(scope="module")
def small_disc(hyperbolic, minimal):
    return EnergyDiscretization(SMALL, hyperbolic, minimal)


def test_constant_has_zero_residual(hyperbolic, minimal):
    u = PolarField(SMALL, np.zeros(SMALL.shape))
    assert np.max(np.abs(discrete_residual(u, minimal, hyperbolic).values)) == 0.0
    # nonzero constants vanish up to roundoff of the pole average
    for c in (1.0, 2.5, -40.0):
        u = PolarField(SMALL, np.full(SMALL.shape, c))
        assert np.max(np.abs(discrete_residual(u, minimal, hyperbolic).values)) < 1e-13 * max(1.0, abs(c))


def test_constant_boundary_solves_immediately(hyperbolic, minimal, small_disc):
    u, rep = solve_dirichlet(SMALL, hyperbolic, minimal, lambda t: np.full_like(t, 5.0), disc=small_disc)
    assert rep.converged and rep.iterations <= 1
    assert np.all(u.values == 5.0)


def test_zero_data_from_noise_init(hyperbolic, minimal, small_disc, rng):
    u, rep = solve_dirichlet(SMALL, hyperbolic, minimal, np.zeros(SMALL.Ntheta), init=rng.standard_normal(SMALL.shape),
                             params=SolverParams(max_newton=200), disc=small_disc)
    assert rep.converged
    assert np.max(np.abs(u.values)) < 1e-10


def test_shift_by_three(hyperbolic, minimal, small_disc):
    g = np.cos(SMALL.thetas)
    u, _ = solve_dirichlet(SMALL, hyperbolic, minimal, g, disc=small_disc)
    v, _ = solve_dirichlet(SMALL, hyperbolic, minimal, g + 3.0, disc=small_disc)
    assert np.max(np.abs(v.values - u.values - 3.0)) < 1e-8


def test_report_histories(hyperbolic, minimal, small_disc):
    u, rep = solve_dirichlet(SMALL, hyperbolic, minimal, 2.0 * np.cos(SMALL.thetas), disc=small_disc)
    assert rep.converged and rep.residual <= 1e-10 * 4.0
    assert len(rep.energy_history) == rep.iterations + 1 == len(rep.residual_history)
    assert all(b <= a + 1e-14 * abs(a) for a, b in zip(rep.energy_history, rep.energy_history[1:]))
    assert all(0 < a <= 1 for a in rep.damping_history)
    assert set(rep.to_dict()) >= {"iterations", "residual", "converged", "energy_history"}


def test_solution_is_energy_minimizer(hyperbolic, minimal, small_disc, rng):
    u, _ = solve_dirichlet(SMALL, hyperbolic, minimal, np.cos(SMALL.thetas), disc=small_disc)
    x = u.values.ravel()
    E = small_disc.energy(x)
    for _ in range(5):
        d = np.zeros_like(x)
        d[small_disc.int] = rng.standard_normal(small_disc.int.size)
        assert small_disc.increment(x, d, 1e-3) > 0
        assert small_disc.energy(x + 1e-3 * d) >= E


def test_comparison_equal_and_shifted(hyperbolic, minimal, small_disc):
    g = np.cos(SMALL.thetas)
    eq = comparison_test(SMALL, hyperbolic, minimal, g, g, disc=small_disc)
    assert eq.ordered and eq.max_violation == 0.0
    rep = comparison_test(SMALL, hyperbolic, minimal, g, g + 0.1, disc=small_disc)
    assert rep.ordered and rep.converged and rep.max_violation < 1e-8
    with pytest.raises(ValueError):
        comparison_test(SMALL, hyperbolic, minimal, g + 0.1, g, disc=small_disc)


def test_boundary_trace_shapes():
    g = PolarGrid.annulus(4, 8, 1.0, 2.0)
    assert boundary_trace(g, np.zeros(8)).shape == (2, 8)
    with pytest.raises(ValueError):
        boundary_trace(g, np.zeros(7))
    with pytest.raises(ValueError):
        boundary_trace(g, np.full(8, np.nan))


def test_init_shape_checked(hyperbolic, minimal, small_disc):
    with pytest.raises(ValueError):
        solve_dirichlet(SMALL, hyperbolic, minimal, np.cos(SMALL.thetas), init=np.zeros((3, 3)), disc=small_disc)


def test_solver_params_from_config():
    p = SolverParams.from_config({"tol": 1e-9, "nr": 32})
    assert p.tol == 1e-9 and p.max_newton == 50


def test_battery_suites_small(hyperbolic, minimal, rng):
    assert shift_suite(SMALL, hyperbolic, minimal, rng, 5, 3.0)["passed"]
    assert maximum_principle_suite(SMALL, hyperbolic, minimal, rng, 5)["passed"]
    assert rotation_suite(SMALL, hyperbolic, minimal, rng, 5)["passed"]
    assert energy_gradient_suite(SMALL, hyperbolic, minimal, rng)["passed"]


def test_laplace_solution_matches_radial_harmonic(hyperbolic, laplace):
    errs, reps = annulus_errors(hyperbolic, laplace, harmonic_radial, 0.5, 3.0, (32, 64))
    assert all(r.converged for r in reps)
    assert 3.4 <= errs[0] / errs[1] <= 4.6


def test_minimal_solution_matches_catenoid(hyperbolic, minimal):
    errs, reps = annulus_errors(hyperbolic, minimal, catenoid_radial, 1.0, 3.0, (32, 64))
    assert all(r.converged for r in reps)
    assert 3.4 <= errs[0] / errs[1] <= 4.6


def test_catenoid_oracle_first_integral():
    # sinh(r) u' / sqrt(1 + u'^2) is constant along the oracle
    r = np.linspace(1.2, 2.8, 9)
    h = 1e-5
    du = (catenoid_radial(r + h) - catenoid_radial(r - h)) / (2 * h)
    np.testing.assert_allclose(np.sinh(r) * du / np.sqrt(1 + du**2), np.sinh(1.0) / 2, rtol=1e-8)


@settings(max_examples=6, deadline=None)
@given(st.integers(0, 2**31), st.floats(-4.0, 4.0))
def test_shift_covariance_property(seed, c):
    from dirinf.geometry import ModelSurface, integrate_jacobi
    from dirinf.operators import minimal_graph_operator
    from dirinf.radial import Constant

    surf = ModelSurface(integrate_jacobi(Constant(1.0), 3.0, 1e-2))
    grid = PolarGrid.disk(8, 16, 3.0)
    spec = minimal_graph_operator()
    g = random_fourier(np.random.default_rng(seed), 3)(grid.thetas)
    u, _ = solve_dirichlet(grid, surf, spec, g)
    v, _ = solve_dirichlet(grid, surf, spec, g + c)
    assert np.max(np.abs(v.values - u.values - c)) < 1e-8


@settings(max_examples=6, deadline=None)
@given(st.integers(0, 2**31))
def test_maximum_principle_property(seed):
    from dirinf.geometry import ModelSurface, integrate_jacobi
    from dirinf.operators import minimal_graph_operator
    from dirinf.radial import Constant

    surf = ModelSurface(integrate_jacobi(Constant(1.0), 3.0, 1e-2))
    grid = PolarGrid.disk(8, 16, 3.0)
    g = random_fourier(np.random.default_rng(seed), 3)(grid.thetas)
    u, rep = solve_dirichlet(grid, surf, minimal_graph_operator(), g)
    assert rep.converged
    assert u.values.max() <= g.max() + 1e-8 and u.values.min() >= g.min() - 1e-8


def test_plaplace_p3_converges(hyperbolic):
    u, rep = solve_dirichlet(SMALL, hyperbolic, p_laplace_operator(3.0), np.cos(SMALL.thetas))
    assert rep.converged
