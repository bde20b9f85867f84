import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from dirinf.geometry import (ModelSurface, ProfileError, build_constant, build_example1, build_example2,
                             check_assumptions, integrate_jacobi, jacobi_mesh, phi1_of_C1, profile_from_config,
                             surface_curvature, warp_from_function)
from dirinf.radial import Blend, Constant, PowerExp, radial_from_dict, smootherstep


# ---------------------------------------------------------------------------
# radial specs


def test_blend_is_flat_then_branch():
    b = Blend(2.0, PowerExp(3.0, -1.0), 0.5, 1.0)
    t = np.array([0.0, 0.25, 0.5, 1.0, 2.0, 7.0])
    v = b(t)
    assert np.all(v[:3] == 2.0)
    np.testing.assert_allclose(v[3:], 3.0 / t[3:], rtol=1e-15)


def test_blend_derivative_matches_differences():
    b = Blend(2.0, PowerExp(3.0, -1.0), 0.5, 1.0)
    t = np.linspace(0.05, 3.0, 400)
    h = 1e-6
    fd = (b(t + h) - b(t - h)) / (2 * h)
    np.testing.assert_allclose(b.deriv(t), fd, atol=1e-7)


def test_smootherstep_endpoints_and_monotone():
    s = np.linspace(-1, 2, 301)
    v = smootherstep(s)
    assert v[0] == 0.0 and v[-1] == 1.0
    assert np.all(np.diff(v) >= 0)


def test_radial_round_trip():
    spec = Blend(1.5, PowerExp(2.0, -0.25, 0.3), 0.4, 1.2)
    again = radial_from_dict(spec.to_dict())
    t = np.linspace(0, 10, 50)
    np.testing.assert_array_equal(spec(t), again(t))
    with pytest.raises(ValueError):
        radial_from_dict({"kind": "spline"})


# ---------------------------------------------------------------------------
# phi1


def test_phi1_closed_values():
    assert phi1_of_C1(math.sqrt(2)) == pytest.approx(2.0, abs=1e-15)
    assert phi1_of_C1(math.sqrt(6)) == pytest.approx(3.0, abs=1e-15)


def test_phi1_of_ten_against_high_precision():
    mpmath.mp.dps = 40
    ref = float((1 + mpmath.sqrt(1 + 4 * mpmath.mpf(10) ** 2)) / 2)
    assert ref == pytest.approx(10.512492197250393, abs=1e-14)  # frozen oracle
    assert phi1_of_C1(10.0) == pytest.approx(ref, abs=1e-13)


@pytest.mark.parametrize("phi", [1.5, 2.0, 3.0, 10.0])
def test_phi1_inverts_C1_of_phi(phi):
    assert abs(phi1_of_C1(math.sqrt(phi * (phi - 1))) - phi) < 1e-12


@given(st.floats(1.0001, 1e4))
def test_phi1_identity_property(phi):
    assert phi1_of_C1(math.sqrt(phi * (phi - 1))) == pytest.approx(phi, rel=1e-12)


def test_phi1_rejects_nonpositive():
    with pytest.raises(ValueError):
        phi1_of_C1(0.0)


# ---------------------------------------------------------------------------
# Jacobi integration


def test_jacobi_hyperbolic_closed_form():
    w = integrate_jacobi(Constant(1.0), 10.0, 1e-3)
    t = np.linspace(0.5, 10.0, 50)
    np.testing.assert_allclose(w.value(t), np.sinh(t), rtol=1e-8)
    np.testing.assert_allclose(w.deriv(t), np.cosh(t), rtol=1e-8)
    assert w.value(1.0) == pytest.approx(1.1752012, abs=1e-7)


def test_jacobi_flat():
    w = integrate_jacobi(Constant(0.0), 10.0, 1e-2)
    assert w.value(7.0) == pytest.approx(7.0, rel=1e-14)
    assert w.deriv(7.0) == pytest.approx(1.0, rel=1e-14)


def test_jacobi_fourth_order():
    errs = []
    for h in (0.1, 0.05):
        w = integrate_jacobi(Constant(1.0), 5.0, h)
        errs.append(abs(w.f[-1] / math.sinh(5.0) - 1))
    assert 12 < errs[0] / errs[1] < 20


def test_jacobi_variable_k_against_scipy():
    k = Blend(1.0, PowerExp(1.0, 0.5), 0.5, 1.5)
    w = integrate_jacobi(k, 4.0, 1e-3)
    sol = solve_ivp(lambda t, y: [y[1], float(k(t)) ** 2 * y[0]], (0, 4.0), [0.0, 1.0],
                    rtol=1e-12, atol=1e-14, dense_output=True)
    t = np.linspace(0.1, 4.0, 30)
    np.testing.assert_allclose(w.value(t), sol.sol(t)[0], rtol=1e-8)


def test_jacobi_rejects_negative_k():
    with pytest.raises(ValueError):
        integrate_jacobi(Constant(-1.0), 2.0, 1e-2)
    with pytest.raises(ValueError):
        integrate_jacobi(Constant(1.0), 2.0, 0.0)


def test_sinh_mesh_reaches_large_radii():
    t = jacobi_mesh(1e10, 1e-3, "sinh")
    assert t[0] == 0 and t[-1] == pytest.approx(1e10) and np.all(np.diff(t) > 0)


def test_warp_table_invariants(example1_warp):
    w = example1_warp
    assert w.f[0] == 0.0 and w.fprime[0] == 1.0
    assert np.all(w.f[1:] > 0) and np.all(w.fprime >= 1.0 - 1e-15)
    assert np.all(w.f >= w.radii * (1 - 1e-14))
    assert np.all(np.diff(w.fprime) >= -1e-12)


def test_warp_comparison():
    a = Constant(0.5)
    b = Blend(0.5, PowerExp(0.5, 0.3), 1.0, 2.0)
    wa, wb = integrate_jacobi(a, 6.0, 1e-3), integrate_jacobi(b, 6.0, 1e-3)
    assert np.all(wa.f <= wb.f * (1 + 1e-14))
    assert np.all(wa.fprime <= wb.fprime * (1 + 1e-14))


def test_warp_csv(tmp_path, hyperbolic_warp):
    p = tmp_path / "w.csv"
    hyperbolic_warp.to_csv(p)
    head = p.read_text().splitlines()[0]
    assert head == "r,f,fprime"


def test_example1_closed_warp(example1_profile, example1_warp):
    phi1, R0 = phi1_of_C1(example1_profile.C1), 1.0
    fa0, fp0 = float(example1_warp.value(R0)), float(example1_warp.deriv(R0))
    c1 = R0**-phi1 * (fa0 * (phi1 - 1) + R0 * fp0) / (2 * phi1 - 1)
    c2 = R0 ** (phi1 - 1) * (fa0 * phi1 - R0 * fp0) / (2 * phi1 - 1)
    t = np.linspace(R0, 50.0, 500)
    np.testing.assert_allclose(example1_warp.value(t), c1 * t**phi1 + c2 * t ** (1 - phi1), rtol=1e-6)


def test_example1_log_derivative_tends_to_phi1(example1_warp):
    q = lambda t: t * example1_warp.deriv(t) / example1_warp.value(t)
    T = example1_warp.R_max
    assert abs(q(T) - 2.0) < abs(q(T / 2) - 2.0)


# ---------------------------------------------------------------------------
# curvature families


def test_example1_constants(example1_profile):
    p = example1_profile
    assert p.C1 == pytest.approx(math.sqrt(2))
    assert p.C4 == 0.125 and p.Qexp == 0.5
    assert p.b_monotonicity == "decreasing"


def test_example1_parameter_checks():
    build_example1(1.5, 0.9)
    with pytest.raises(ProfileError, match="2\\*phi"):
        build_example1(1.2, 1.0)
    with pytest.raises(ProfileError):
        build_example1(0.9, 0.1)


def test_example2_constants():
    p = build_example2(1.0, 1.0, 5.0)
    assert p.T1 == 5.0 and p.Qexp == 0.5 and p.C4 == 0.25
    assert build_example2(2.0, 1.0, 5.0).T1 == 2.5
    assert float(p.b(10.0) / p.b(9.0)) <= p.C2
    t = np.linspace(0, 100, 20001)
    assert np.all(p.b(t) >= 1.0 - 1e-12)


def test_example2_C2_from_independent_scan():
    p = build_example2(1.0, 1.0, 5.0)
    b = lambda t: np.asarray(p.b(t))
    t = np.linspace(0, 100, 100001)
    scan = max(np.max(b(t + 1) / b(t)), np.max(b(t / 2) / b(t)), 1.0)
    assert scan <= p.C2 * (1 + 1e-6)
    assert p.C2 == pytest.approx(scan, rel=1e-3)


def test_profile_invariants_hold(example1_profile):
    example1_profile.check_invariants(t_max=500.0)


def test_profile_from_config():
    p = profile_from_config({"family": "example1", "phi": 2.0, "eps": 0.5})
    assert p.family == "example1"
    with pytest.raises(ProfileError, match="missing key"):
        profile_from_config({"family": "example2", "k": 1.0})
    with pytest.raises(ProfileError):
        profile_from_config({"family": "torus"})


# ---------------------------------------------------------------------------
# surfaces and assumptions


def test_surface_curvature_hyperbolic(hyperbolic):
    np.testing.assert_allclose(surface_curvature(hyperbolic, np.array([0.5, 3.0, 9.0])), -1.0, rtol=1e-12)


def test_surface_curvature_flat():
    r = np.linspace(0, 10, 101)
    s = ModelSurface(warp_from_function(r, r, np.ones_like(r)))
    np.testing.assert_allclose(surface_curvature(s, np.array([2.0, 5.0])), 0.0, atol=1e-9)


def test_surface_curvature_example1(example1_warp):
    s = ModelSurface(example1_warp)
    assert float(surface_curvature(s, 4.0)) == pytest.approx(-0.125, rel=1e-12)
    # independent second differences of the tabulated warp
    h = 1e-3
    fd = -(example1_warp.value(4 + h) - 2 * example1_warp.value(4.0) + example1_warp.value(4 - h)) / h**2
    assert fd / example1_warp.value(4.0) == pytest.approx(-0.125, rel=1e-5)


def test_surface_curvature_out_of_range(hyperbolic):
    with pytest.raises(ValueError):
        surface_curvature(hyperbolic, 100.0)


def test_assumptions_example1(example1_profile):
    w = integrate_jacobi(example1_profile.a, 100.0, 1e-3)
    rep = check_assumptions(example1_profile, w)
    assert rep.passed, rep.to_dict()


def test_assumptions_example2():
    p = build_example2(1.0, 1.0, 5.0)
    w = integrate_jacobi(p.a, 100.0, 1e-3)
    assert check_assumptions(p, w).passed


def test_assumptions_euclidean_witness():
    p = build_constant(0.0)
    w = integrate_jacobi(p.a, 50.0, 1e-2)
    rep = check_assumptions(p, w)
    assert not rep.passed
    v = rep["A5"].to_dict()
    assert not v["passed"]
    assert v["witness"] == {"t": 0.0, "lhs": 0.0, "rhs": p.C3}


def test_assumptions_reject_mismatched_warp(example1_profile):
    with pytest.raises(ValueError):
        check_assumptions(example1_profile, integrate_jacobi(Constant(1.0), 10.0, 1e-2))
    with pytest.raises(ValueError):
        check_assumptions(example1_profile, integrate_jacobi(example1_profile.a, 10.0, 1e-2), sample_count=10)


def test_failed_verdicts_carry_witness():
    p = build_constant(0.0)
    rep = check_assumptions(p, integrate_jacobi(p.a, 50.0, 1e-2))
    for v in rep.verdicts:
        if not v.passed:
            assert set(v.to_dict()["witness"]) == {"t", "lhs", "rhs"}


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_warp_monotone_in_curvature(k1, k2):
    lo, hi = sorted((k1, k2))
    wl, wh = integrate_jacobi(Constant(lo), 4.0, 1e-2), integrate_jacobi(Constant(hi), 4.0, 1e-2)
    assert np.all(wl.f <= wh.f * (1 + 1e-13))
    assert np.all(wl.fprime <= wh.fprime * (1 + 1e-13))
