import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import solve_banded

from dirinf.grid import PolarField, PolarGrid, read_field_csv
from dirinf.linalg import IndefiniteOperatorError, amg_preconditioner, linear_solve_spd
from dirinf.operators import p_laplace_operator
from dirinf.solver import EnergyDiscretization, laplace_beltrami_matrix


def test_disk_grid_rings():
    g = PolarGrid.disk(4, 8, 2.0)
    np.testing.assert_allclose(g.radii, [0.25, 0.75, 1.25, 1.75, 2.0])
    assert g.shape == (5, 8) and g.boundary_rings() == [4]
    assert g.boundary_mask().sum() == 8


def test_annulus_grid_rings():
    g = PolarGrid.annulus(4, 8, 1.0, 3.0)
    np.testing.assert_allclose(g.radii, [1.0, 1.5, 2.0, 2.5, 3.0])
    assert g.boundary_rings() == [0, 4]


@pytest.mark.parametrize("args", [(4, 7, 1.0), (1, 8, 1.0), (4, 2, 1.0)])
def test_grid_rejects(args):
    with pytest.raises(ValueError):
        PolarGrid.disk(*args)


def test_grid_beyond_surface(flat):
    with pytest.raises(ValueError):
        PolarGrid.disk(4, 8, 20.0).check_surface(flat)


def test_field_csv_round_trip(tmp_path, rng):
    g = PolarGrid.disk(3, 8, 1.0)
    u = PolarField(g, rng.standard_normal(g.shape))
    u.to_csv(tmp_path / "u.csv", name="u")
    r, t, v = read_field_csv(tmp_path / "u.csv")
    np.testing.assert_array_equal(r, g.radii)
    np.testing.assert_array_equal(v, u.values)


def test_field_ring_interp():
    g = PolarGrid.disk(4, 8, 2.0)
    vals = np.repeat(g.radii[:, None], 8, axis=1)
    u = PolarField(g, vals)
    np.testing.assert_allclose(u.ring_interp(1.0), 1.0)
    with pytest.raises(ValueError):
        u.ring_interp(0.1)


def test_field_rejects_nonfinite():
    g = PolarGrid.disk(2, 4, 1.0)
    with pytest.raises(ValueError):
        PolarField(g, np.full(g.shape, np.inf))


def test_cg_identity(rng):
    b = rng.standard_normal(50)
    res = linear_solve_spd(sp.identity(50), b)
    np.testing.assert_allclose(res.x, b, rtol=1e-15)
    assert res.iterations == 1 and res.converged


def test_cg_zero_rhs():
    res = linear_solve_spd(np.eye(3), np.zeros(3))
    assert res.converged and res.iterations == 0 and not res.x.any()


def test_cg_tridiagonal_against_banded(rng):
    n = 200
    main, off = 2.0 + 0.01 * rng.random(n), -np.ones(n - 1)
    A = sp.diags([off, main, off], [-1, 0, 1], format="csr")
    x_true = np.sin(np.linspace(0, 3, n))
    b = A @ x_true
    ab = np.zeros((3, n))
    ab[0, 1:], ab[1], ab[2, :-1] = off, main, off
    ref = solve_banded((1, 1), ab, b)
    res = linear_solve_spd(A, b, tol=1e-13)
    np.testing.assert_allclose(res.x, ref, atol=1e-10)
    res_amg = linear_solve_spd(A, b, tol=1e-13, precond=amg_preconditioner(A))
    np.testing.assert_allclose(res_amg.x, ref, atol=1e-10)
    assert res_amg.iterations < res.iterations


def test_cg_callable_operator(rng):
    d = 1.0 + rng.random(30)
    b = rng.standard_normal(30)
    res = linear_solve_spd(lambda v: d * v, b, tol=1e-14)
    np.testing.assert_allclose(res.x, b / d, rtol=1e-12)


def test_cg_detects_indefinite():
    with pytest.raises(IndefiniteOperatorError):
        linear_solve_spd(np.diag([1.0, -1.0]), np.array([1.0, 1.0]))


def test_laplacian_is_newton_matrix_at_zero(hyperbolic):
    g = PolarGrid.disk(8, 16, 3.0)
    disc = EnergyDiscretization(g, hyperbolic, p_laplace_operator(2.0))
    K = laplace_beltrami_matrix(g, hyperbolic)
    H = disc.hessian(np.zeros(disc.N))
    assert abs(K - H).max() < 1e-12 * abs(K).max()
    rhs = np.ones(K.shape[0])
    res = linear_solve_spd(K, rhs, tol=1e-10)
    assert res.converged and res.iterations <= K.shape[0]


def test_amg_is_deterministic(hyperbolic, rng):
    K = laplace_beltrami_matrix(PolarGrid.disk(24, 48, 3.0), hyperbolic)
    b = rng.standard_normal(K.shape[0])
    x1 = linear_solve_spd(K, b, precond=amg_preconditioner(K)).x
    x2 = linear_solve_spd(K, b, precond=amg_preconditioner(K)).x
    assert np.array_equal(x1, x2)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 40), st.integers(0, 2**31))
def test_cg_spd_property(n, seed):
    r = np.random.default_rng(seed)
    M = r.standard_normal((n, n))
    A = M @ M.T + n * np.eye(n)
    b = r.standard_normal(n)
    res = linear_solve_spd(A, b, tol=1e-12)
    assert res.converged
    np.testing.assert_allclose(A @ res.x, b, atol=1e-9 * np.linalg.norm(b) * np.linalg.cond(A))
