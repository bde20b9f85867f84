"""Variational discretization of ``div A(|grad u|^2) grad u = 0`` on polar grids.

The discrete energy is a quadrature of ``sum Phi(|grad u|^2) dm`` over the
quads spanned by consecutive rings and angles.  Each quad averages Phi over
its four corners, where the corner gradient combines the radial difference
along one angular edge with the angular difference along one ring.  For a
disk grid the innermost ring is closed off by a pole term that treats the
ring average as the value at the pole.  The residual is the energy gradient
divided by the nodal dual area, so it approximates ``-Q[u]`` pointwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .grid import PolarField, PolarGrid
from .linalg import IndefiniteOperatorError, amg_preconditioner, linear_solve_spd
from .operators import OperatorSpec, p_laplace_operator


class SolverError(RuntimeError):
    pass


def _gauss_integral(fn, a, b, n=8):
    x, w = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (b - a) * x + 0.5 * (b + a)
    return float(0.5 * (b - a) * np.dot(w, fn(t)))


class EnergyDiscretization:
    """Sparse corner-gradient operators, quadrature weights and nodal areas."""

    def __init__(self, grid: PolarGrid, surface, spec: OperatorSpec, s_floor: float = 1e-14):
        grid.check_surface(surface)
        self.grid, self.surface, self.spec, self.s_floor = grid, surface, spec, s_floor
        radii = grid.radii
        nring, nt = grid.shape
        self.N = nring * nt
        dth = grid.dtheta
        fr = surface.f(radii)
        idx = np.arange(self.N).reshape(nring, nt)

        rows_r, rows_t, weights = [], [], []
        i = np.repeat(np.arange(nring - 1), nt)
        j = np.tile(np.arange(nt), nring - 1)
        nq = i.size
        h = radii[i + 1] - radii[i]
        area = surface.f(0.5 * (radii[i] + radii[i + 1])) * h * dth
        q = np.arange(nq)
        mass = np.zeros(self.N)
        for a in (0, 1):
            ja = (j + a) % nt
            Dr = sp.csr_matrix((np.concatenate([1.0 / h, -1.0 / h]),
                                (np.concatenate([q, q]), np.concatenate([idx[i + 1, ja], idx[i, ja]]))),
                               shape=(nq, self.N))
            for b in (0, 1):
                ib = i + b
                c = 1.0 / (dth * fr[ib])
                Dt = sp.csr_matrix((np.concatenate([c, -c]),
                                    (np.concatenate([q, q]), np.concatenate([idx[ib, (j + 1) % nt], idx[ib, j]]))),
                                   shape=(nq, self.N))
                rows_r.append(Dr)
                rows_t.append(Dt)
                weights.append(0.25 * area)
            for ring in (i, i + 1):
                np.add.at(mass, idx[ring, ja], 0.25 * area)

        if grid.kind == "disk":
            r0 = radii[0]
            F0 = _gauss_integral(surface.f, 0.0, r0)
            jj = np.arange(nt)
            P = (np.eye(nt) - 1.0 / nt) / r0
            Dr = sp.csr_matrix(sp.hstack([sp.csr_matrix(P), sp.csr_matrix((nt, self.N - nt))]))
            c = 1.0 / (dth * fr[0])
            for shift in (1, -1):
                other = (jj + shift) % nt
                sign = 1.0 if shift == 1 else -1.0
                Dt = sp.csr_matrix((np.concatenate([sign * c * np.ones(nt), -sign * c * np.ones(nt)]),
                                    (np.concatenate([jj, jj]), np.concatenate([idx[0, other], idx[0, jj]]))),
                                   shape=(nt, self.N))
                rows_r.append(Dr)
                rows_t.append(Dt)
                weights.append(np.full(nt, 0.5 * F0 * dth))
            mass[idx[0]] += F0 * dth

        self.Gr = sp.vstack(rows_r).tocsr()
        self.Gt = sp.vstack(rows_t).tocsr()
        self.w = np.concatenate(weights)
        self.mass = mass
        bmask = grid.boundary_mask().ravel()
        self.bnd = np.flatnonzero(bmask)
        self.int = np.flatnonzero(~bmask)
        self.Gr_I, self.Gt_I = self.Gr[:, self.int], self.Gt[:, self.int]

    # -- pointwise pieces
    def _coef(self, s, floor=False):
        if floor:
            s = np.maximum(s, self.s_floor)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            a = self.spec.A_eval(s)
        if not floor:
            a = np.where(s > 0, a, np.where(np.isfinite(a), a, 0.0))
        return a

    def corner_gradients(self, u):
        return self.Gr @ u, self.Gt @ u

    def energy(self, u) -> float:
        gr, gt = self.corner_gradients(u)
        return float(np.dot(self.w, self.spec.energy_density(gr * gr + gt * gt)))

    def gradient(self, u) -> np.ndarray:
        gr, gt = self.corner_gradients(u)
        a = self.w * self._coef(gr * gr + gt * gt)
        return self.Gr.T @ (a * gr) + self.Gt.T @ (a * gt)

    def residual(self, u) -> np.ndarray:
        """``-dE/du`` per unit area; zero on Dirichlet nodes."""
        res = -self.gradient(u) / self.mass
        res[self.bnd] = 0.0
        return res

    def hessian(self, u):
        """Interior block of ``G^T (A I + 2 A' g g^T) G``; SPD because 1 + 2 B s > 0."""
        gr, gt = self.corner_gradients(u)
        s = np.maximum(gr * gr + gt * gt, self.s_floor)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            a = self.spec.A_eval(s)
            da = self.spec.dA_eval(s)
        w = self.w
        d11 = sp.diags(w * (a + 2.0 * da * gr * gr))
        d22 = sp.diags(w * (a + 2.0 * da * gt * gt))
        d12 = sp.diags(w * 2.0 * da * gr * gt)
        Gr, Gt = self.Gr_I, self.Gt_I
        cross = Gr.T @ d12 @ Gt
        K = Gr.T @ d11 @ Gr + Gt.T @ d22 @ Gt + cross + cross.T
        return sp.csr_matrix(K)

    def laplacian(self):
        """Interior and coupling blocks of the p = 2 stiffness matrix."""
        W = sp.diags(self.w)
        K = self.Gr.T @ W @ self.Gr + self.Gt.T @ W @ self.Gt
        K = sp.csr_matrix(K)
        return K[self.int][:, self.int], K[self.int][:, self.bnd]

    def increment(self, u, d, alpha: float) -> float:
        """``E(u + alpha d) - E(u)`` summed term by term to avoid cancellation."""
        gr, gt = self.corner_gradients(u)
        dr, dt = self.Gr @ d, self.Gt @ d
        s0 = gr * gr + gt * gt
        ds = alpha * dr * (2.0 * gr + alpha * dr) + alpha * dt * (2.0 * gt + alpha * dt)
        return float(np.dot(self.w, self.spec.increment(s0, np.maximum(s0 + ds, 0.0))))


def discrete_residual(u: PolarField, spec: OperatorSpec, surface, disc: EnergyDiscretization | None = None) -> PolarField:
    if not np.all(np.isfinite(u.values)):
        raise ValueError("nonfinite field")
    disc = disc or EnergyDiscretization(u.grid, surface, spec)
    return PolarField(u.grid, disc.residual(u.values.ravel()).reshape(u.grid.shape), u.grid.boundary_mask())


@dataclass
class SolverParams:
    tol: float = 1e-10
    max_newton: int = 50
    damping: bool = True
    cg_tol: float = 1e-12
    armijo: float = 1e-4
    max_backtracks: int = 30

    @classmethod
    def from_config(cls, sec: dict) -> "SolverParams":
        keys = {"tol", "max_newton", "damping", "cg_tol", "armijo", "max_backtracks"}
        return cls(**{k: sec[k] for k in keys if k in sec})


@dataclass
class SolveReport:
    iterations: int
    residual: float
    energy_history: list = field(default_factory=list)
    damping_history: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)
    cg_iterations: list = field(default_factory=list)
    converged: bool = False
    message: str = ""

    def to_dict(self):
        return {"iterations": self.iterations, "residual": self.residual, "converged": self.converged,
                "energy_history": self.energy_history, "damping_history": self.damping_history,
                "residual_history": self.residual_history, "cg_iterations": self.cg_iterations,
                "message": self.message}


def boundary_trace(grid: PolarGrid, boundary) -> np.ndarray:
    """Boundary values as an array (n_boundary_rings, Ntheta)."""
    rings = grid.boundary_rings()
    if callable(boundary):
        vals = np.asarray(boundary(grid.thetas), dtype=float)
        vals = np.broadcast_to(vals, (len(rings), grid.Ntheta)).copy()
    else:
        vals = np.asarray(boundary, dtype=float)
        if vals.shape == (grid.Ntheta,):
            vals = np.tile(vals, (len(rings), 1))
        if vals.shape != (len(rings), grid.Ntheta):
            raise ValueError(f"boundary trace must have shape ({len(rings)}, {grid.Ntheta})")
    if not np.all(np.isfinite(vals)):
        raise ValueError("boundary data must be finite")
    return vals


def _pcg(K, rhs, tol):
    res = linear_solve_spd(K, rhs, tol=tol, precond=amg_preconditioner(K), maxiter=2000)
    return res


def harmonic_extension(disc: EnergyDiscretization, u: np.ndarray, tol: float = 1e-13) -> np.ndarray:
    """Replace interior values by the discrete p = 2 solution with u's boundary values."""
    K, KB = disc.laplacian()
    rhs = -(KB @ u[disc.bnd])
    out = u.copy()
    out[disc.int] = _pcg(K, rhs, tol).x
    return out


def solve_dirichlet(grid: PolarGrid, surface, spec: OperatorSpec, boundary, params: SolverParams | None = None,
                    init=None, disc: EnergyDiscretization | None = None):
    """Damped Newton with Armijo backtracking on the discrete energy."""
    params = params or SolverParams()
    if spec.name == "plaplace" and not spec.p > 1:
        raise ValueError("the solver requires p > 1")
    disc = disc or EnergyDiscretization(grid, surface, spec)
    trace = boundary_trace(grid, boundary)
    u = np.zeros(grid.shape)
    u[grid.boundary_rings()] = trace
    osc = float(trace.max() - trace.min())
    if init is not None:
        iv = init.values if isinstance(init, PolarField) else np.asarray(init, float)
        if iv.shape != grid.shape:
            raise ValueError("initial field has the wrong shape")
        u[~grid.boundary_mask()] = iv[~grid.boundary_mask()]
        u = u.ravel()
    elif osc == 0.0:
        u[:] = trace.flat[0]
        u = u.ravel()
    else:
        u = harmonic_extension(disc, u.ravel())

    report = SolveReport(0, float("nan"))
    E = disc.energy(u)
    report.energy_history.append(E)
    # tolerance relative to the oscillation; constant data falls back to the amplitude (or 1 for zero data)
    thresh = params.tol * (osc if osc > 0 else max(float(np.max(np.abs(trace))), 1.0))
    m_int = disc.mass[disc.int]

    def resid(v):
        return float(np.max(np.abs(disc.gradient(v)[disc.int] / m_int))) if disc.int.size else 0.0

    res = resid(u)
    report.residual_history.append(res)
    it = 0
    while True:
        if res <= thresh:
            report.converged = True
            break
        if it >= params.max_newton:
            report.message = "iteration cap reached"
            break
        g = disc.gradient(u)[disc.int]
        K = disc.hessian(u)
        try:
            cg = _pcg(K, -g, params.cg_tol)
        except IndefiniteOperatorError as exc:
            raise SolverError(f"Newton system breakdown at iteration {it}: {exc}") from exc
        report.cg_iterations.append(cg.iterations)
        d = np.zeros_like(u)
        d[disc.int] = cg.x
        slope = float(np.dot(g, cg.x))
        alpha, accepted, dE = 1.0, False, 0.0
        for _ in range(params.max_backtracks + 1):
            dE = disc.increment(u, d, alpha)
            if not params.damping or dE <= params.armijo * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            # at roundoff level the energy cannot resolve the decrease; fall back to the residual
            alpha = 1.0
            dE = disc.increment(u, d, 1.0)
            if resid(u + d) >= res:
                report.message = "line search failed"
                break
        u = u + alpha * d
        it += 1
        report.energy_history.append(report.energy_history[-1] + dE)
        report.damping_history.append(alpha)
        res = resid(u)
        report.residual_history.append(res)
    report.iterations = it
    report.residual = res
    field_ = PolarField(grid, u.reshape(grid.shape), grid.boundary_mask())
    return field_, report


@dataclass
class ComparisonReport:
    max_violation: float
    location: tuple
    ordered: bool
    converged: bool

    def to_dict(self):
        return {"max_violation": self.max_violation, "location": list(self.location), "ordered": self.ordered,
                "converged": self.converged}


def comparison_test(grid, surface, spec, g_low, g_high, params=None, tol: float = 1e-8,
                    disc: EnergyDiscretization | None = None) -> ComparisonReport:
    """Solve with two ordered traces and measure how far ``u_low <= u_high`` is violated."""
    lo, hi = boundary_trace(grid, g_low), boundary_trace(grid, g_high)
    if np.any(lo > hi):
        raise ValueError("boundary data must satisfy g_low <= g_high")
    disc = disc or EnergyDiscretization(grid, surface, spec)
    u_lo, r_lo = solve_dirichlet(grid, surface, spec, lo, params, disc=disc)
    u_hi, r_hi = solve_dirichlet(grid, surface, spec, hi, params, disc=disc)
    viol = u_lo.values - u_hi.values
    k = np.unravel_index(int(np.argmax(viol)), viol.shape)
    mv = max(0.0, float(viol[k]))
    loc = (float(grid.radii[k[0]]), float(grid.thetas[k[1]]))
    return ComparisonReport(mv, loc, mv <= tol, r_lo.converged and r_hi.converged)


def laplace_beltrami_matrix(grid, surface):
    """Interior stiffness matrix of the p = 2 energy (the Newton matrix for p = 2)."""
    return EnergyDiscretization(grid, surface, p_laplace_operator(2.0)).laplacian()[0]
