"""Seeded property battery: comparison, shift covariance, maximum principle, equivariance, consistency."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .barrier import BarrierGrid, Mollifier
from .experiment import random_fourier
from .grid import PolarGrid
from .solver import EnergyDiscretization, SolverParams, comparison_test, solve_dirichlet

TOL = 1e-8


def _map(fn, items, workers):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def comparison_suite(grid, surface, spec, rng, pairs: int, modes: int, params=None, workers: int = 1) -> dict:
    data = [(random_fourier(rng, modes), random_fourier(rng, modes)) for _ in range(pairs)]
    disc = EnergyDiscretization(grid, surface, spec)

    def one(pair):
        f1, f2 = (np.asarray(f(grid.thetas)) for f in pair)
        return comparison_test(grid, surface, spec, np.minimum(f1, f2), f1, params, TOL, disc)

    reps = _map(one, data, workers)
    worst = max(r.max_violation for r in reps)
    return {"passed": bool(all(r.ordered and r.converged for r in reps)), "pairs": pairs,
            "max_violation": worst, "violations": [r.max_violation for r in reps]}


def shift_suite(grid, surface, spec, rng, modes: int, shift: float, params=None) -> dict:
    g = random_fourier(rng, modes)(grid.thetas)
    disc = EnergyDiscretization(grid, surface, spec)
    u, r1 = solve_dirichlet(grid, surface, spec, g, params, disc=disc)
    v, r2 = solve_dirichlet(grid, surface, spec, g + shift, params, disc=disc)
    err = float(np.max(np.abs(v.values - u.values - shift)))
    return {"passed": bool(err <= TOL and r1.converged and r2.converged), "shift": shift, "max_error": err}


def maximum_principle_suite(grid, surface, spec, rng, modes: int, samples: int = 3, params=None) -> dict:
    disc = EnergyDiscretization(grid, surface, spec)
    excess = []
    for _ in range(samples):
        g = random_fourier(rng, modes)(grid.thetas)
        u, _ = solve_dirichlet(grid, surface, spec, g, params, disc=disc)
        excess.append(float(max(u.values.max() - g.max(), g.min() - u.values.min(), 0.0)))
    return {"passed": bool(max(excess) <= TOL), "max_excess": max(excess)}


def rotation_suite(grid, surface, spec, rng, modes: int, params=None) -> dict:
    g = random_fourier(rng, modes)(grid.thetas)
    shift = int(rng.integers(1, grid.Ntheta))
    disc = EnergyDiscretization(grid, surface, spec)
    u, _ = solve_dirichlet(grid, surface, spec, g, params, disc=disc)
    v, _ = solve_dirichlet(grid, surface, spec, np.roll(g, shift), params, disc=disc)
    err = float(np.max(np.abs(np.roll(u.values, shift, axis=1) - v.values)))
    return {"passed": bool(err <= TOL), "steps": shift, "max_error": err}


def energy_gradient_suite(grid, surface, spec, rng, step: float = 1e-6) -> dict:
    """Residual equals the directional derivative of the discrete energy."""
    disc = EnergyDiscretization(grid, surface, spec)
    u = rng.standard_normal(grid.shape).ravel()
    d = np.zeros_like(u)
    d[disc.int] = rng.standard_normal(disc.int.size)
    num = (disc.increment(u, d, step) - disc.increment(u, d, -step)) / (2 * step)
    ana = float(np.dot(disc.gradient(u), d))
    rel = abs(num - ana) / max(abs(ana), 1e-300)
    return {"passed": bool(rel <= 1e-6), "relative_error": rel}


def mollifier_suite(surface, profile, rng, nr: int = 48, ntheta: int = 64, fields: int = 10) -> dict:
    r_max = min(surface.R_max, 8.0)
    grid = BarrierGrid(surface, nr, ntheta, r_max)
    moll = Mollifier(grid, profile)
    const_err = float(np.max(np.abs(moll.apply(np.full(grid.shape, 0.37)) - 0.37)))
    range_ok = True
    for _ in range(fields):
        v = rng.uniform(-1.0, 1.0, grid.shape)
        out = moll.apply(v)
        range_ok &= bool(out.min() >= v.min() and out.max() <= v.max())
    return {"passed": bool(const_err <= 1e-12 and range_ok), "constant_error": const_err, "range_preserved": range_ok}


def run_battery(surface, spec, profile, seed: int, pairs: int = 20, nr: int = 32, ntheta: int = 64,
                R: float = 4.0, modes: int = 5, shift: float = 3.0, params: SolverParams | None = None,
                workers: int = 1) -> dict:
    rng = np.random.default_rng(seed)
    grid = PolarGrid.disk(nr, ntheta, R)
    suites = {
        "comparison": comparison_suite(grid, surface, spec, rng, pairs, modes, params, workers),
        "shift_covariance": shift_suite(grid, surface, spec, rng, modes, shift, params),
        "maximum_principle": maximum_principle_suite(grid, surface, spec, rng, modes, params=params),
        "rotation": rotation_suite(grid, surface, spec, rng, modes, params),
        "energy_gradient": energy_gradient_suite(grid, surface, spec, rng),
        "mollifier": mollifier_suite(surface, profile, rng),
    }
    return {"seed": int(seed), "grid": grid.to_dict(), "passed": bool(all(s["passed"] for s in suites.values())),
            "suites": suites}
