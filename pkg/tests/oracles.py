"""Independent closed-form and quadrature references shared by the tests."""

import numpy as np
from scipy.integrate import quad


def harmonic_radial(r):
    """Radial p = 2 solution on the hyperbolic plane: u' = 1/sinh."""
    return np.log(np.tanh(np.asarray(r, float) / 2.0))


def catenoid_radial(r, r_inner=1.0):
    """Radial minimal graph with first integral sinh(r) u'/sqrt(1+u'^2) = sinh(r_inner)/2."""
    c = np.sinh(r_inner) / 2.0
    one = lambda x: quad(lambda s: c / np.sqrt(np.sinh(s) ** 2 - c**2), r_inner, x, epsabs=1e-14, epsrel=1e-14)[0]
    return np.vectorize(one)(np.asarray(r, float))


def annulus_errors(surface, spec, oracle, r_inner, R, sizes):
    """Sup errors of the annulus solve with radial oracle traces, plus per-solve reports."""
    from dirinf.grid import PolarGrid
    from dirinf.solver import solve_dirichlet

    errs, reps = [], []
    for n in sizes:
        g = PolarGrid.annulus(n, n, r_inner, R)
        exact = oracle(g.radii)
        trace = np.stack([np.full(n, exact[0]), np.full(n, exact[-1])])
        u, rep = solve_dirichlet(g, surface, spec, trace)
        errs.append(float(np.max(np.abs(u.values - exact[:, None]))))
        reps.append(rep)
    return np.array(errs), reps
