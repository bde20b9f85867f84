"""Barrier supersolutions ``phi = A (R4^delta rho^-delta + h)`` near a boundary direction.

The boundary function ``h`` is extended crudely into the surface, mollified
with a kernel whose width follows the curvature lower bound ``b``, and the
radial part is tuned by searching for ``R4``.  Every inequality used by the
construction is then checked on grid nodes plus low-discrepancy points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra
from scipy.stats import qmc

from .geometry import CurvatureProfile, ModelSurface, WarpTable, phi1_of_C1
from .grid import PolarField
from .operators import OperatorSpec


class SolvabilityConditionError(ValueError):
    def __init__(self, lhs: float, rhs: float):
        self.lhs, self.rhs = lhs, rhs
        super().__init__(f"solvability condition failed: B0 = {lhs:.6g} is not < ((n-1) phi1 - 1)/2 = {rhs:.6g}")


class DomainTooSmallError(RuntimeError):
    pass


class EmptySupportError(ValueError):
    pass


def wrap_angle(x):
    """Distance to 0 on the circle, in [0, pi]."""
    return np.abs(np.mod(np.asarray(x, float) + np.pi, 2.0 * np.pi) - np.pi)


def boundary_h(theta, L: float, theta0: float = 0.0):
    if not L > 8.0 / math.pi:
        raise ValueError(f"L must exceed 8/pi, got {L}")
    return np.minimum(1.0, L * wrap_angle(np.asarray(theta, float) - theta0))


def crude_extension(r, theta, L: float, theta0: float = 0.0):
    r = np.asarray(r, float)
    if np.any(r < 0):
        raise ValueError("radius must be nonnegative")
    ang = L * wrap_angle(np.asarray(theta, float) - theta0)
    return np.minimum(1.0, np.maximum(2.0 - 2.0 * r, ang))


def cutoff(x):
    """Smooth even cutoff: 1 on [-1, 1], 0 outside (-2, 2), built from exp(-1/t)."""
    x = np.abs(np.asarray(x, float))

    def psi(t):
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = np.exp(-1.0 / t[pos])
        return out

    a, b = psi(2.0 - x), psi(x - 1.0)
    return a / (a + b)


@dataclass(frozen=True)
class ConeRegion:
    theta0: float
    L: float
    inner_radius: float = 0.0

    def contains(self, r, theta, multiple: float = 1.0):
        """Points of ``multiple * Omega`` outside the closed inner ball."""
        ang = wrap_angle(np.asarray(theta, float) - self.theta0)
        return (ang < multiple / self.L) & (np.asarray(r, float) > self.inner_radius)


# ---------------------------------------------------------------------------
# grids with a radial map


@dataclass(frozen=True, eq=False)
class BarrierGrid:
    """Cell-centred grid in a radial coordinate xi with ``r = r(xi)``.

    ``mapping="uniform"``: r = xi.  ``mapping="sinh"``: r = scale sinh(xi),
    which resolves the pole and reaches very large radii with few rings.
    """

    surface: ModelSurface
    nr: int
    ntheta: int
    r_max: float
    mapping: str = "uniform"
    scale: float = 1.0

    def __post_init__(self):
        if self.ntheta < 4 or self.ntheta % 2:
            raise ValueError("ntheta must be even and >= 4")
        if self.r_max > self.surface.R_max * (1 + 1e-12):
            raise ValueError("barrier grid exceeds the surface radius")
        if self.mapping == "uniform":
            xmax = self.r_max
        elif self.mapping == "sinh":
            xmax = math.asinh(self.r_max / self.scale)
        else:
            raise ValueError(f"unknown mapping {self.mapping!r}")
        dxi = xmax / self.nr
        xi = (np.arange(self.nr) + 0.5) * dxi
        if self.mapping == "uniform":
            r, r1, r2 = xi, np.ones_like(xi), np.zeros_like(xi)
        else:
            r, r1, r2 = self.scale * np.sinh(xi), self.scale * np.cosh(xi), self.scale * np.sinh(xi)
        for k, v in dict(dxi=dxi, xi=xi, radii=r, r1=r1, r2=r2, f=self.surface.f(r),
                         fp=self.surface.fprime(r)).items():
            object.__setattr__(self, k, v)

    @property
    def thetas(self):
        return np.arange(self.ntheta) * (2.0 * math.pi / self.ntheta)

    @property
    def dtheta(self):
        return 2.0 * math.pi / self.ntheta

    @property
    def shape(self):
        return (self.nr, self.ntheta)

    @property
    def cell_widths(self):
        return self.r1 * self.dxi

    def xi_of_r(self, r):
        r = np.asarray(r, float)
        return r if self.mapping == "uniform" else np.arcsinh(r / self.scale)

    def to_dict(self):
        return {"nr": self.nr, "ntheta": self.ntheta, "r_max": self.r_max, "mapping": self.mapping,
                "scale": self.scale}


def _d_xi(u, h):
    d1 = np.empty_like(u)
    d2 = np.empty_like(u)
    d1[1:-1] = (u[2:] - u[:-2]) / (2 * h)
    d1[0] = (-3 * u[0] + 4 * u[1] - u[2]) / (2 * h)
    d1[-1] = (3 * u[-1] - 4 * u[-2] + u[-3]) / (2 * h)
    d2[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / h**2
    d2[0] = (2 * u[0] - 5 * u[1] + 4 * u[2] - u[3]) / h**2
    d2[-1] = (2 * u[-1] - 5 * u[-2] + 4 * u[-3] - u[-4]) / h**2
    return d1, d2


def coordinate_derivatives(grid: BarrierGrid, u) -> dict:
    """u_r, u_t, u_rr, u_rt, u_tt by second-order differences (periodic in theta)."""
    u = np.asarray(u, float)
    dt = grid.dtheta
    r1 = grid.r1[:, None]
    r2 = grid.r2[:, None]
    uxi, uxixi = _d_xi(u, grid.dxi)
    ut = (np.roll(u, -1, axis=1) - np.roll(u, 1, axis=1)) / (2 * dt)
    utt = (np.roll(u, -1, axis=1) - 2 * u + np.roll(u, 1, axis=1)) / dt**2
    ur = uxi / r1
    urr = (uxixi - r2 * ur) / r1**2
    utxi, _ = _d_xi(ut, grid.dxi)
    return {"u_r": ur, "u_t": ut, "u_rr": urr, "u_rt": utxi / r1, "u_tt": utt}


def frame_quantities(d: dict, f, fp) -> dict:
    """Orthonormal-frame gradient and Hessian from coordinate derivatives."""
    g1 = d["u_r"]
    g2 = d["u_t"] / f
    H11 = d["u_rr"]
    H12 = (d["u_rt"] - (fp / f) * d["u_t"]) / f
    H22 = d["u_tt"] / f**2 + (fp / f) * d["u_r"]
    return {"g1": g1, "g2": g2, "H11": H11, "H12": H12, "H22": H22, "lap": H11 + H22}


def hess_norm(q):
    """Operator norm of the symmetric 2x2 frame Hessian."""
    tr = 0.5 * (q["H11"] + q["H22"])
    rad = np.sqrt((0.5 * (q["H11"] - q["H22"])) ** 2 + q["H12"] ** 2)
    return np.abs(tr) + rad


def hess_apply(q, v1, v2):
    return q["H11"] * v1 + q["H12"] * v2, q["H12"] * v1 + q["H22"] * v2


# ---------------------------------------------------------------------------
# mollifier


@dataclass(eq=False)
class Mollifier:
    """Averaging operator with weights ``cutoff(b(r_y) d(x, y)) dm(y)``.

    ``d`` is the shortest-path distance in the 8-connected grid graph with
    metric edge lengths.  The graph is invariant under grid rotations, so one
    Dijkstra run per ring gives the distances from every node of that ring.
    """

    grid: BarrierGrid
    profile: CurvatureProfile

    def __post_init__(self):
        g = self.grid
        nr, nt = g.shape
        r, f, dth = g.radii, g.f, g.dtheta
        idx = np.arange(nr * nt).reshape(nr, nt)
        jj = np.arange(nt)
        rows, cols, vals = [], [], []

        def add(a, b, w):
            rows.append(a.ravel()), cols.append(b.ravel()), vals.append(w.ravel())

        add(idx, idx[:, (jj + 1) % nt], np.repeat((f * dth)[:, None], nt, 1))
        dr = np.diff(r)
        fm = self.grid.surface.f(0.5 * (r[1:] + r[:-1]))
        add(idx[:-1], idx[1:], np.repeat(dr[:, None], nt, 1))
        diag = np.sqrt(dr**2 + (fm * dth) ** 2)
        for s in (1, -1):
            add(idx[:-1], idx[1:, (jj + s) % nt], np.repeat(diag[:, None], nt, 1))
        A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nr * nt,) * 2)
        graph = (A + A.T).tocsr()

        b = self.profile.b(r)
        if np.any(b <= 0):
            raise EmptySupportError("b must be positive on the grid for the mollifier to have finite support")
        reach = 2.0 / b
        mass = f * g.cell_widths * dth
        self.rows = []
        self.row_ffts = []
        self.support = []
        self.total_weight = np.empty(nr)
        self.resolved = np.zeros(nr, dtype=bool)
        for i in range(nr):
            # a source ring i can only reach rings j with |r_i - r_j| < 2 / b(r_j)
            near = np.abs(r - r[i]) < reach
            lim = float(np.max(reach[near]))
            dist = dijkstra(graph, indices=int(idx[i, 0]), limit=lim).reshape(nr, nt)
            W = cutoff(b[:, None] * dist) * mass[:, None]
            W[~np.isfinite(dist)] = 0.0
            keep = np.flatnonzero(np.any(W > 0, axis=1))
            Wk = W[keep]
            self.rows.append((keep, Wk))
            self.row_ffts.append(np.fft.rfft(Wk, axis=1))
            self.support.append(np.fft.rfft((Wk > 0).astype(float), axis=1))
            self.total_weight[i] = Wk.sum()
            self.resolved[i] = np.count_nonzero(Wk) > 1
        if np.any(self.total_weight <= 0):
            raise EmptySupportError("mollifier weight vanished; refine the grid below 1/max(b)")

    def _correlate(self, ffts, v_hat, i):
        keep = self.rows[i][0]
        return np.fft.irfft(np.sum(np.conj(ffts[i]) * v_hat[keep], axis=0), n=self.grid.ntheta)

    def apply(self, values, return_counts: bool = False):
        v = np.asarray(values, float)
        hi, lo = float(v.max()), float(v.min())
        dev = hi - v
        dev_hat = np.fft.rfft(dev, axis=1)
        ind_hat = np.fft.rfft((dev != 0).astype(float), axis=1)
        out = np.empty_like(v)
        counts = np.empty_like(v)
        for i in range(self.grid.nr):
            if not self.resolved[i]:
                # self-weight only: pass through exactly, FFT roundoff would fake a radial slope
                out[i] = v[i]
                counts[i] = (dev[i] != 0).astype(float)
                continue
            c = np.rint(self._correlate(self.support, ind_hat, i))
            s = self._correlate(self.row_ffts, dev_hat, i) / self.total_weight[i]
            # nodes whose support sees only the maximum keep it exactly
            out[i] = np.where(c > 0, hi - s, hi)
            counts[i] = c
        out = np.clip(out, lo, hi)
        return (out, counts) if return_counts else out


def mollify(field: PolarField, profile: CurvatureProfile, surface: ModelSurface | None = None,
            mollifier: Mollifier | None = None) -> PolarField:
    moll = mollifier or Mollifier(field.grid, profile)
    return PolarField(field.grid, moll.apply(field.values))


def r1_empirical(grid: BarrierGrid, counts, L: float, theta0: float) -> float:
    """Smallest ring radius beyond which no node outside 2 Omega sees h~ < 1."""
    outside = wrap_angle(grid.thetas - theta0)[None, :] >= 2.0 / L
    bad = np.any((counts > 0) & outside, axis=1)
    if not np.any(bad):
        return float(grid.radii[0])
    last = int(np.flatnonzero(bad)[-1])
    if last + 1 >= grid.nr:
        return math.inf
    return float(grid.radii[last + 1])


# ---------------------------------------------------------------------------
# constants


def delta1_of(phi1: float, C4: float, n: int) -> float:
    m = (n - 1) * phi1
    return min(C4, (m - 1.0) / (m + 1.0))


def lambda_of(delta: float, phi1: float, n: int) -> float:
    return (1.0 + delta) / ((1.0 - delta) * (n - 1) * phi1)


def delta_bound_lhs(delta, phi1, n, B0) -> float:
    lam = lambda_of(delta, phi1, n)
    B0bar = max(0.5, B0)
    if not lam < 1:
        return math.inf
    return delta + 2.0 * lam * (max(0.0, B0) + B0bar * delta) / ((1.0 - lam) * (1.0 - delta) ** 3)


def solvability_rhs(phi1: float, n: int) -> float:
    return 0.5 * ((n - 1) * phi1 - 1.0)


def choose_delta(phi1, C4, n, B0) -> float:
    """Largest admissible delta not above half of min(delta1, phi1 - 1, C4/2)."""
    cap = 0.5 * min(delta1_of(phi1, C4, n), phi1 - 1.0, C4 / 2.0)
    if delta_bound_lhs(cap, phi1, n, B0) < 1.0:
        return cap
    lo, hi = 0.0, cap  # the left side increases with delta and tends to 0 at 0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if delta_bound_lhs(mid, phi1, n, B0) < 1.0 else (lo, mid)
    if lo == 0.0:
        raise SolvabilityConditionError(B0, solvability_rhs(phi1, n))
    return lo


@dataclass
class BarrierConfig:
    L: float
    theta0: float
    delta: float
    R4: float
    amplitude: float
    phi1: float
    delta1: float
    lam: float
    B0bar: float
    c5_emp: float
    c6_emp: float
    R1: float
    n: int
    B0: float
    C4: float
    conditions: dict = field(default_factory=dict)
    h_field: PolarField | None = field(default=None, repr=False)
    grid: BarrierGrid | None = field(default=None, repr=False)
    warp_a: WarpTable | None = field(default=None, repr=False)

    def to_dict(self):
        keys = ("L", "theta0", "delta", "R4", "amplitude", "phi1", "delta1", "lam", "B0bar", "c5_emp",
                "c6_emp", "R1", "n", "B0", "C4")
        out = {k: getattr(self, k) for k in keys}
        out["lambda"] = out.pop("lam")
        out["conditions"] = self.conditions
        if self.grid is not None:
            out["grid"] = self.grid.to_dict()
        return out

    def with_amplitude(self, amplitude: float) -> "BarrierConfig":
        import dataclasses
        return dataclasses.replace(self, amplitude=float(amplitude))


@dataclass(eq=False)
class BarrierFields:
    """Frame quantities of h and of rho^-delta on the barrier grid."""

    h: dict
    w: dict
    coord_h: dict
    coord_w: dict


def _fields(grid: BarrierGrid, h_values, delta):
    w = grid.radii[:, None] ** (-delta) * np.ones(grid.shape)
    ch = coordinate_derivatives(grid, h_values)
    cw = coordinate_derivatives(grid, w)
    f, fp = grid.f[:, None], grid.fp[:, None]
    return BarrierFields(frame_quantities(ch, f, fp), frame_quantities(cw, f, fp), ch, cw)


def _c6_terms(F: BarrierFields, rho, fa, fap, C4):
    qh, qw = F.h, F.w
    gh = np.hypot(qh["g1"], qh["g2"])
    Hn = hess_norm(qh)
    # grad <grad h, grad h> = 2 Hess h (grad h)
    a1, a2 = hess_apply(qh, qh["g1"], qh["g2"])
    ghh = 2.0 * np.hypot(a1, a2)
    # grad <grad h, grad w> = Hess h (grad w) + Hess w (grad h)
    b1, b2 = hess_apply(qh, qw["g1"], qw["g2"])
    c1, c2 = hess_apply(qw, qh["g1"], qh["g2"])
    ghw = np.hypot(b1 + c1, b2 + c2)
    ratio = fa / fap
    return np.maximum.reduce([gh * fa, Hn * rho ** (C4 + 1) * ratio, ghh * rho ** (C4 + 2) * ratio,
                              ghw * rho ** (C4 + 2) * ratio])


def compute_barrier_config(profile: CurvatureProfile, warp_a: WarpTable, spec: OperatorSpec, n: int, L: float,
                           grid: BarrierGrid, theta0: float = 0.0, amplitude: float = 1.0,
                           mollifier: Mollifier | None = None, refine: bool = True) -> BarrierConfig:
    """Derive delta, R4 and the empirical constants; raises if no R4 fits on the grid."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if not L > 8.0 / math.pi:
        raise ValueError(f"L must exceed 8/pi, got {L}")
    phi1 = phi1_of_C1(profile.C1)
    rhs = solvability_rhs(phi1, n)
    if not spec.B0 < rhs:
        raise SolvabilityConditionError(spec.B0, rhs)
    C4 = profile.C4
    delta = choose_delta(phi1, C4, n, spec.B0)
    lam = lambda_of(delta, phi1, n)
    B0bar = max(0.5, spec.B0)
    d1 = delta1_of(phi1, C4, n)

    moll = mollifier or Mollifier(grid, profile)
    R, T = np.meshgrid(grid.radii, grid.thetas, indexing="ij")
    crude = crude_extension(R, T, L, theta0)
    h_vals, counts = moll.apply(crude, return_counts=True)
    R1 = r1_empirical(grid, counts, L, theta0)
    F = _fields(grid, h_vals, delta)
    rho = R
    fa = warp_a.value(grid.radii)[:, None]
    fap = warp_a.deriv(grid.radii)[:, None]
    lap_rho = (grid.fp / grid.f)[:, None]
    cone3 = wrap_angle(T - theta0) < 3.0 / L

    qw = F.w
    neg_lap_w = -qw["lap"]
    cond_lap = neg_lap_w / (delta * rho ** (-delta - 1) * lap_rho)
    grad_ratio = np.hypot(F.h["g1"], F.h["g2"]) / np.hypot(qw["g1"], qw["g2"])
    warp_ratio = rho * fap / fa
    with np.errstate(divide="ignore", invalid="ignore"):
        lap_ratio = np.abs(F.h["lap"]) / neg_lap_w
    c6_node = _c6_terms(F, rho, fa, fap, C4)
    # suffix suprema over rings of the sampled region
    c6_ring = np.where(cone3, c6_node, 0.0).max(axis=1)
    c6_suffix = np.maximum.accumulate(c6_ring[::-1])[::-1]

    checks = {}

    def evaluate(Rc):
        sel = cone3 & (rho >= Rc)
        i0 = int(np.searchsorted(grid.radii, Rc))
        c6 = float(c6_suffix[i0])
        lhs33 = 3 * B0bar * c6 * rho ** (-C4 + 2 * delta) / (
            Rc**delta * (1 - delta / Rc**delta) ** 2 * delta**2 * (1 - lam) * (n - 1))
        tests = {
            "lap_w_positive": (neg_lap_w > 0),
            "lap_w_vs_lap_rho": (cond_lap >= 1 - lam),
            "grad_h_vs_grad_w": (grad_ratio <= delta),
            "warp_log_derivative": (warp_ratio >= (1 - delta) * phi1),
            "lap_h_vs_lap_w": (lap_ratio <= delta),
            "hessian_tail": (lhs33 <= delta),
        }
        out = {}
        for k, m in tests.items():
            bad = sel & ~m
            out[k] = (not np.any(bad), int(np.count_nonzero(bad)))
        out["R1_inside"] = (R1 <= Rc, 0 if R1 <= Rc else 1)
        return out, int(np.count_nonzero(sel)), c6

    last_region = grid.radii[-2]  # keep one ring beyond R4 so the region is not a single circle
    Rc, prev = 1.0, 1.0
    while True:
        checks, count, c6 = evaluate(Rc)
        if count > 0 and all(v[0] for v in checks.values()):
            break
        if Rc >= last_region:
            failing = [k for k, v in checks.items() if not v[0]]
            raise DomainTooSmallError(
                f"R4 search passed the grid radius {grid.radii[-1]:.6g}; still failing: {', '.join(failing)}")
        prev, Rc = Rc, min(2.0 * Rc, float(last_region))

    # doubling overshoots by up to a factor 2; bisect over the rings of (prev, Rc)
    if refine and Rc > prev:
        cand = grid.radii[(grid.radii > prev) & (grid.radii < Rc)]
        lo, hi = 0, len(cand)
        while lo < hi:
            mid = (lo + hi) // 2
            chk, cnt, c6m = evaluate(float(cand[mid]))
            if cnt > 0 and all(v[0] for v in chk.values()):
                hi = mid
            else:
                lo = mid + 1
        if lo < len(cand):
            Rc = float(cand[lo])
            checks, count, c6 = evaluate(Rc)
    R4 = Rc
    sel1 = cone3 & (rho >= R1) if math.isfinite(R1) else np.zeros_like(cone3)
    qh = F.h
    bvals = profile.b(grid.radii)[:, None]
    with np.errstate(invalid="ignore"):
        c5_node = np.maximum(np.hypot(qh["g1"], qh["g2"]) * fa, hess_norm(qh) * fa / bvals)
    c5 = float(np.max(c5_node[sel1])) if np.any(sel1) else math.nan
    cfg = BarrierConfig(L=float(L), theta0=float(theta0), delta=delta, R4=R4, amplitude=float(amplitude),
                        phi1=phi1, delta1=d1, lam=lam, B0bar=B0bar, c5_emp=c5, c6_emp=c6, R1=R1, n=int(n),
                        B0=spec.B0, C4=C4,
                        conditions={k: {"passed": v[0], "violations": v[1]} for k, v in checks.items()},
                        h_field=PolarField(grid, h_vals), grid=grid, warp_a=warp_a)
    return cfg


# ---------------------------------------------------------------------------
# evaluation at arbitrary points


def _bilinear(grid: BarrierGrid, arrays, r, theta):
    """Interpolate ring/angle arrays at (r, theta), bilinear in (xi, theta)."""
    xi = grid.xi_of_r(r)
    s = xi / grid.dxi - 0.5
    i = np.clip(np.floor(s).astype(int), 0, grid.nr - 2)
    a = np.clip(s - i, 0.0, 1.0)
    t = np.mod(np.asarray(theta, float), 2 * math.pi) / grid.dtheta
    j = np.floor(t).astype(int) % grid.ntheta
    c = t - np.floor(t)
    j1 = (j + 1) % grid.ntheta
    out = []
    for A in arrays:
        out.append((1 - a) * ((1 - c) * A[i, j] + c * A[i, j1]) + a * ((1 - c) * A[i + 1, j] + c * A[i + 1, j1]))
    return out


def h_at(cfg: BarrierConfig, h_field: PolarField, r, theta):
    return _bilinear(h_field.grid, [h_field.values], r, theta)[0]


def barrier_value(r, theta, cfg: BarrierConfig, h_field: PolarField | None = None):
    r = np.asarray(r, float)
    if np.any(r <= 0):
        raise ValueError("barrier is singular at the pole (r = 0)")
    h_field = h_field or cfg.h_field
    if h_field is None:
        h = 0.0
    elif callable(h_field):
        h = h_field(r, theta)
    else:
        h = h_at(cfg, h_field, r, theta)
    return cfg.amplitude * (cfg.R4**cfg.delta * r ** (-cfg.delta) + h)


_COORD = ("u_r", "u_t", "u_rr", "u_rt", "u_tt")


def point_quantities(cfg: BarrierConfig, h_field: PolarField, surface: ModelSurface, r, theta):
    """Frame quantities of h and of rho^-delta at arbitrary points inside the grid."""
    grid = h_field.grid
    r = np.asarray(r, float)
    theta = np.asarray(theta, float)
    ch = coordinate_derivatives(grid, h_field.values)
    w = grid.radii[:, None] ** (-cfg.delta) * np.ones(grid.shape)
    cw = coordinate_derivatives(grid, w)
    vals = _bilinear(grid, [ch[k] for k in _COORD] + [cw[k] for k in _COORD], r, theta)
    f, fp = surface.f(r), surface.fprime(r)
    qh = frame_quantities(dict(zip(_COORD, vals[:5])), f, fp)
    qw = frame_quantities(dict(zip(_COORD, vals[5:])), f, fp)
    return qh, qw


def _phi_quantities(cfg, qh, qw):
    c = cfg.R4**cfg.delta
    A = cfg.amplitude
    return {k: A * (c * qw[k] + qh[k]) for k in qh}


def ratio_from_quantities(spec: OperatorSpec, qp: dict):
    g1, g2 = qp["g1"], qp["g2"]
    s = g1 * g1 + g2 * g2
    Hgg = qp["H11"] * g1 * g1 + 2 * qp["H12"] * g1 * g2 + qp["H22"] * g2 * g2
    with np.errstate(divide="ignore", invalid="ignore"):
        B = spec.B_eval(s)
        return B * 2.0 * Hgg / (-qp["lap"])


def supersolution_ratio(r, theta, cfg: BarrierConfig, h_field: PolarField, spec: OperatorSpec,
                        surface: ModelSurface):
    """Left side of the supersolution inequality (must be < 1)."""
    qh, qw = point_quantities(cfg, h_field, surface, r, theta)
    return ratio_from_quantities(spec, _phi_quantities(cfg, qh, qw))


@dataclass
class CertificationReport:
    samples: int
    grid_samples: int
    random_samples: int
    ratio_max: float
    ratio_pass_fraction: float
    lap_w_min: float
    lap_phi_max: float
    grad_phi_min: float
    worst_point: tuple
    passed: bool
    sign_passed: bool

    def to_dict(self):
        return dict(self.__dict__)


def certification_points(cfg: BarrierConfig, grid: BarrierGrid, n_random: int = 10_000, seed: int = 0):
    """Grid nodes of 3 Omega outside B(o, R4) plus scrambled Halton points of the same set."""
    R, T = np.meshgrid(grid.radii, grid.thetas, indexing="ij")
    cone = wrap_angle(T - cfg.theta0) < 3.0 / cfg.L
    # interior rings only, so that every sample uses centred differences
    ring_ok = np.zeros(grid.nr, bool)
    ring_ok[1:-1] = True
    sel = cone & (R >= cfg.R4) & ring_ok[:, None]
    rg, tg = R[sel], T[sel]
    if n_random:
        pts = qmc.Halton(d=2, scramble=True, seed=seed).random(n_random)
        x0, x1 = grid.xi_of_r(cfg.R4), grid.xi[-2]
        if x1 <= x0:
            raise DomainTooSmallError("no certification region between R4 and the last interior ring")
        xi = x0 + pts[:, 0] * (x1 - x0)
        r_rand = xi if grid.mapping == "uniform" else grid.scale * np.sinh(xi)
        t_rand = cfg.theta0 + (2 * pts[:, 1] - 1) * (3.0 / cfg.L) * (1 - 1e-12)
        rg = np.concatenate([rg, r_rand])
        tg = np.concatenate([tg, t_rand])
    return rg, tg, int(np.count_nonzero(sel))


def certify(cfg: BarrierConfig, spec: OperatorSpec, surface: ModelSurface, n_random: int = 10_000,
            seed: int = 0) -> CertificationReport:
    grid = cfg.h_field.grid
    r, t, ng = certification_points(cfg, grid, n_random, seed)
    qh, qw = point_quantities(cfg, cfg.h_field, surface, r, t)
    qp = _phi_quantities(cfg, qh, qw)
    ratio = ratio_from_quantities(spec, qp)
    gphi = np.hypot(qp["g1"], qp["g2"])
    ok = np.isfinite(ratio) & (ratio < 1.0)
    k = int(np.nanargmax(np.where(np.isfinite(ratio), ratio, np.inf)))
    sign_ok = bool(np.all(-qw["lap"] > 0) and np.all(qp["lap"] < 0) and np.all(gphi > 0))
    return CertificationReport(
        samples=int(r.size), grid_samples=ng, random_samples=int(r.size - ng),
        ratio_max=float(ratio[k]), ratio_pass_fraction=float(np.mean(ok)),
        lap_w_min=float(np.min(-qw["lap"])), lap_phi_max=float(np.max(qp["lap"])),
        grad_phi_min=float(np.min(gphi)), worst_point=(float(r[k]), float(t[k])),
        passed=bool(np.all(ok)) and sign_ok, sign_passed=sign_ok)


def estimate_diagnostics(cfg: BarrierConfig, h_field: PolarField, warp_a: WarpTable, surface: ModelSurface,
                         samples, spec: OperatorSpec | None = None) -> dict:
    """Per-sample decomposition of the supersolution quotient with its a priori bounds."""
    r, t = (np.asarray(s, float) for s in samples)
    qh, qw = point_quantities(cfg, h_field, surface, r, t)
    qp = _phi_quantities(cfg, qh, qw)
    d, lam, B0, B0bar, n = cfg.delta, cfg.lam, cfg.B0, cfg.B0bar, cfg.n
    c = cfg.R4**d
    u = {k: c * qw[k] + qh[k] for k in qh}
    gu = np.hypot(u["g1"], u["g2"])
    neg_lap_u = -u["lap"]
    ww = 2 * d * d * (d + 1) * r ** (-2 * d - 3)  # |grad <grad w, grad w>| in closed form
    radial_q = ww / (gu * neg_lap_u)
    # <grad <grad w, grad w>, grad w> = 2 delta^3 (delta + 1) rho^(-3 delta - 4)
    www = 2 * d**3 * (d + 1) * r ** (-3 * d - 4)
    sphi = qp["g1"] ** 2 + qp["g2"] ** 2
    Bp = spec.B_eval(sphi) if spec is not None else np.full_like(r, max(0.0, B0)) / sphi
    term_radial = Bp * sphi * c**3 * www / (gu**2 * neg_lap_u)
    a1, a2 = hess_apply(qh, qh["g1"], qh["g2"])
    ghh = 2 * np.hypot(a1, a2)
    b1, b2 = hess_apply(qh, qw["g1"], qw["g2"])
    e1, e2 = hess_apply(qw, qh["g1"], qh["g2"])
    ghw = np.hypot(b1 + e1, b2 + e2)
    term_hessian = B0bar * (ghh + 2 * c * ghw) / (gu * neg_lap_u)
    gh = np.hypot(qh["g1"], qh["g2"])
    term_cross = B0bar * c**2 * ww * gh / (gu**2 * neg_lap_u)
    lap_rho = surface.fprime(r) / surface.f(r)
    comparison = lap_rho - (n - 1) * warp_a.deriv(r) / warp_a.value(r)
    bounds = {
        "radial_quotient": 2 * lam / ((c - d) ** 2 * (1 - lam)),
        "term_radial": 2 * max(0.0, B0) * lam / ((1 - d) ** 3 * (1 - lam)),
        "term_hessian": d,
        "term_cross": 2 * B0bar * d * lam / ((1 - d) ** 3 * (1 - lam)),
    }
    values = {"radial_quotient": radial_q, "term_radial": term_radial, "term_hessian": term_hessian,
              "term_cross": term_cross}
    report = {"samples": int(r.size), "bounds": bounds, "terms": {}}
    for k, v in values.items():
        report["terms"][k] = {"max": float(np.max(v)), "bound": bounds[k],
                              "violations": int(np.count_nonzero(v > bounds[k] * (1 + 1e-9)))}
    report["bound_sum"] = bounds["term_radial"] + bounds["term_hessian"] + bounds["term_cross"]
    report["laplace_comparison_min"] = float(np.min(comparison))
    report["values"] = values
    return report
