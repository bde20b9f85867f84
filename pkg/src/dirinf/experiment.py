"""Exhaustion by geodesic balls, envelope checks against a barrier, uniqueness probes."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .barrier import BarrierConfig, barrier_value, boundary_h, wrap_angle
from .grid import PolarField, PolarGrid
from .operators import OperatorSpec
from .solver import EnergyDiscretization, SolverParams, harmonic_extension, solve_dirichlet


# ---------------------------------------------------------------------------
# boundary data


@dataclass(frozen=True)
class AngularData:
    """Boundary function on the circle at infinity, described by a small dict."""

    kind: str
    params: dict = field(default_factory=dict)

    def __call__(self, theta):
        t = np.asarray(theta, float)
        p = self.params
        if self.kind == "cos":
            return p.get("amplitude", 1.0) * np.cos(p.get("mode", 1) * t)
        if self.kind == "constant":
            return np.full_like(t, p.get("value", 0.0))
        if self.kind == "sawtooth":
            return boundary_h(t, p["L"], p.get("theta0", 0.0))
        if self.kind == "fourier":
            out = np.full_like(t, p.get("mean", 0.0))
            for k, (a, b) in enumerate(zip(p["cos"], p["sin"]), start=1):
                out = out + a * np.cos(k * t) + b * np.sin(k * t)
            return out
        raise ValueError(f"unknown boundary data kind {self.kind!r}")

    def to_dict(self):
        return {"kind": self.kind, **self.params}


def angular_data_from_dict(d: dict) -> AngularData:
    d = dict(d)
    kind = d.pop("kind")
    if kind not in ("cos", "constant", "sawtooth", "fourier"):
        raise ValueError(f"unknown boundary data kind {kind!r}")
    if kind == "sawtooth" and "L" not in d:
        raise ValueError("sawtooth boundary data needs L")
    if kind == "fourier" and len(d.get("cos", [])) != len(d.get("sin", [])):
        raise ValueError("fourier boundary data needs equally long cos and sin lists")
    return AngularData(kind, d)


def random_fourier(rng: np.random.Generator, modes: int = 5, scale: float = 1.0) -> AngularData:
    k = np.arange(1, modes + 1)
    a = scale * rng.standard_normal(modes) / k
    b = scale * rng.standard_normal(modes) / k
    mean = scale * rng.standard_normal()
    return AngularData("fourier", {"mean": float(mean), "cos": a.tolist(), "sin": b.tolist()})


@dataclass(frozen=True)
class RadialExtension:
    """Extension constant along rays: value(r, theta) = f(theta)."""

    f: object

    def value(self, r, theta):
        r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
        return np.asarray(self.f(theta), float) * np.ones_like(r)

    def trace(self, grid: PolarGrid) -> np.ndarray:
        vals = np.asarray(self.f(grid.thetas), float)
        return np.tile(vals, (len(grid.boundary_rings()), 1))

    def sup_abs(self, samples: int = 4096) -> float:
        return float(np.max(np.abs(self.f(np.arange(samples) * (2 * math.pi / samples)))))


def extend_boundary_data(f) -> RadialExtension:
    return RadialExtension(f)


def choose_L(f, eps: float, theta0: float = 0.0, samples: int = 1 << 16) -> float:
    """Smallest L > 8/pi whose 4/L cone keeps the sampled oscillation of f below eps/2."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    alpha = np.arange(samples + 1) * (math.pi / samples)
    f0 = float(f(np.array([theta0]))[0])
    dev = np.maximum(np.abs(f(theta0 + alpha) - f0), np.abs(f(theta0 - alpha) - f0))
    osc = np.maximum.accumulate(dev)
    ok = np.flatnonzero(osc < 0.5 * eps)
    floor = math.nextafter(8.0 / math.pi, math.inf)
    if ok[-1] == samples:
        return floor
    # angles below alpha[j] are all admissible once osc[j] < eps/2
    a_star = float(alpha[ok[-1]])
    if a_star == 0.0:
        raise ValueError("f oscillates by eps/2 on every sampled cone")
    return max(4.0 / a_star, floor)


# ---------------------------------------------------------------------------
# exhaustion


@dataclass(eq=False)
class ExhaustionRun:
    schedule: list
    data: dict
    dr: float
    ntheta: int
    compacts: list
    solutions: list = field(default_factory=list, repr=False)
    reports: list = field(default_factory=list, repr=False)
    differences: dict = field(default_factory=dict)
    attainment: list = field(default_factory=list)
    envelope: dict | None = None
    partial: bool = False

    def metrics(self) -> dict:
        out = {
            "schedule": [float(R) for R in self.schedule],
            "boundary_data": self.data,
            "dr": self.dr,
            "ntheta": self.ntheta,
            "compacts": [float(c) for c in self.compacts],
            "converged": [bool(rep.converged) for rep in self.reports],
            "newton_iterations": [int(rep.iterations) for rep in self.reports],
            "residuals": [float(rep.residual) for rep in self.reports],
            "d": {f"{c:g}": [float(x) for x in v] for c, v in self.differences.items()},
            "attainment": [float(x) for x in self.attainment],
            "partial": self.partial,
        }
        if self.envelope is not None:
            out["envelope"] = self.envelope
        return out


def exhaustion_grid(R: float, dr: float, ntheta: int) -> PolarGrid:
    nr = int(round(R / dr))
    if not math.isclose(nr * dr, R, rel_tol=1e-12):
        raise ValueError(f"radius {R} is not a multiple of the ring spacing {dr}")
    return PolarGrid.disk(nr, ntheta, R)


def sup_difference(u: PolarField, v: PolarField, radius: float) -> float:
    """Max |u - v| over interior rings shared by both grids with r <= radius."""
    ru, rv = u.grid.radii[:-1], v.grid.radii[:-1]
    n = min(len(ru), len(rv))
    if not np.allclose(ru[:n], rv[:n], rtol=0, atol=1e-12):
        raise ValueError("fields do not share their inner rings")
    sel = ru[:n] <= radius
    if not np.any(sel):
        return 0.0
    return float(np.max(np.abs(u.values[:n][sel] - v.values[:n][sel])))


def attainment_gap(u: PolarField, f, fraction: float = 0.9) -> float:
    r = fraction * u.grid.R
    return float(np.max(np.abs(u.ring_interp(r) - f(u.grid.thetas))))


def run_exhaustion(surface, spec: OperatorSpec, f, schedule, params: SolverParams | None = None,
                   dr: float = 0.125, ntheta: int = 128, compacts=(1.0, 2.0, 4.0), workers: int = 1,
                   extension: RadialExtension | None = None) -> ExhaustionRun:
    sched = [float(R) for R in schedule]
    if any(b <= a for a, b in zip(sched, sched[1:])) or not sched or sched[0] <= 0:
        raise ValueError("schedule must be positive and strictly increasing")
    if surface.R_max is not None and sched[-1] > surface.R_max:
        raise ValueError(f"schedule radius {sched[-1]} exceeds the surface radius {surface.R_max}")
    ext = extension or extend_boundary_data(f)
    params = params or SolverParams()
    grids = [exhaustion_grid(R, dr, ntheta) for R in sched]

    def one(g):
        return solve_dirichlet(g, surface, spec, ext.trace(g), params)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, grids))
    else:
        results = [one(g) for g in grids]

    data = f.to_dict() if hasattr(f, "to_dict") else {"kind": "callable"}
    run = ExhaustionRun(sched, data, float(dr), int(ntheta), [float(c) for c in compacts])
    for u, rep in results:
        if not rep.converged:
            run.partial = True
            break
        run.solutions.append(u)
        run.reports.append(rep)
    if run.partial:
        # keep the failed report so the caller can see why
        run.reports.append(results[len(run.solutions)][1])
    for c in run.compacts:
        run.differences[c] = [sup_difference(a, b, c) for a, b in zip(run.solutions, run.solutions[1:])]
    run.attainment = [attainment_gap(u, f) for u in run.solutions]
    return run


# ---------------------------------------------------------------------------
# envelope


def envelope_check(run: ExhaustionRun, theta0: float, eps: float, cfg: BarrierConfig, h_field=None,
                   f=None) -> dict:
    """Check -phi + f(x0) - eps <= u_k <= phi + f(x0) + eps on U = 3 Omega minus the closed R4 ball."""
    if f is None:
        raise ValueError("envelope_check needs the boundary function f")
    ext = extend_boundary_data(f)
    amp = 2.0 * ext.sup_abs()
    cfg = cfg.with_amplitude(amp)
    f0 = float(f(np.array([theta0]))[0])
    hf = h_field if h_field is not None else cfg.h_field
    r_cap = hf.grid.radii[-1] if hf is not None and not callable(hf) else math.inf
    per_k = []
    total_bad = 0
    for u in run.solutions:
        g = u.grid
        R, T = np.meshgrid(g.radii, g.thetas, indexing="ij")
        # the barrier is only tabulated up to its last ring
        sel = (wrap_angle(T - theta0) < 3.0 / cfg.L) & (R > cfg.R4) & (R <= r_cap)
        entry = {"R": float(g.R), "points": int(np.count_nonzero(sel))}
        if entry["points"]:
            r, t, uk = R[sel], T[sel], u.values[sel]
            phi = barrier_value(r, t, cfg, hf)
            low = uk - (-phi + f0 - eps)
            up = (phi + f0 + eps) - uk
            bad = (low < 0) | (up < 0)
            k = int(np.argmin(np.minimum(low, up)))
            entry.update(lower_slack_min=float(low.min()), upper_slack_min=float(up.min()),
                         violations=int(np.count_nonzero(bad)), worst=[float(r[k]), float(t[k])],
                         band_min=float(np.min(up + low)))
            total_bad += entry["violations"]
        else:
            entry.update(lower_slack_min=None, upper_slack_min=None, violations=0, worst=None, band_min=None)
        per_k.append(entry)
    return {"theta0": float(theta0), "eps": float(eps), "L": float(cfg.L), "R4": float(cfg.R4),
            "amplitude": amp, "per_k": per_k, "violations": total_bad,
            "points": int(sum(e["points"] for e in per_k))}


# ---------------------------------------------------------------------------
# uniqueness


def standard_inits(grid: PolarGrid, surface, spec: OperatorSpec, f) -> dict:
    """Harmonic extension, zero interior, and the constant max of the trace."""
    trace = extend_boundary_data(f).trace(grid)
    base = np.zeros(grid.shape)
    base[grid.boundary_rings()] = trace
    disc = EnergyDiscretization(grid, surface, spec)
    harm = harmonic_extension(disc, base.ravel()).reshape(grid.shape)
    top = base.copy()
    top[~grid.boundary_mask()] = trace.max()
    return {"harmonic": harm, "zero": base, "boundary_max": top}


def uniqueness_probe(surface, spec: OperatorSpec, f, grid: PolarGrid, inits: dict | None = None,
                     params: SolverParams | None = None) -> dict:
    inits = inits if inits is not None else standard_inits(grid, surface, spec, f)
    trace = extend_boundary_data(f).trace(grid)
    disc = EnergyDiscretization(grid, surface, spec)
    sols, runs = {}, {}
    for name, init in inits.items():
        iv = init.values if isinstance(init, PolarField) else np.asarray(init, float)
        if not np.allclose(iv[grid.boundary_rings()], trace, rtol=0, atol=1e-12):
            raise ValueError(f"init {name!r} does not match the boundary trace")
        u, rep = solve_dirichlet(grid, surface, spec, trace, params, init=iv, disc=disc)
        runs[name] = {"converged": bool(rep.converged), "iterations": int(rep.iterations),
                      "residual": float(rep.residual)}
        if rep.converged:
            sols[name] = u.values
    names = list(sols)
    pairs = {}
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            pairs[f"{a}|{b}"] = float(np.max(np.abs(sols[a] - sols[b])))
    return {"runs": runs, "pairwise": pairs, "max_difference": max(pairs.values()) if pairs else None,
            "solutions": sols}
