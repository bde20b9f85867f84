"""Rotationally symmetric model surfaces and their curvature bounds.

A model surface carries the metric ``dr^2 + f(r)^2 dtheta^2`` where the warp
``f = f_k`` solves the Jacobi problem ``f'' = k^2 f, f(0) = 0, f'(0) = 1``.
Curvature bounds ``a <= b`` are :class:`~dirinf.radial.RadialFunction`
objects collected in a :class:`CurvatureProfile`; :func:`check_assumptions`
verifies the growth conditions (A1)-(A7) on a sampled lattice.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .radial import Blend, Constant, PowerExp, RadialFunction


class JacobiBlowupError(FloatingPointError):
    """The warp function left the representable range; shrink R_max."""


class ProfileError(ValueError):
    """A curvature family was requested with inadmissible parameters."""


def phi1_of_C1(C1: float) -> float:
    """Exponent ``(1 + sqrt(1 + 4 C1^2)) / 2`` attached to the (A1) constant."""
    if not C1 > 0:
        raise ValueError(f"C1 must be positive, got {C1}")
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * C1 * C1))


# ---------------------------------------------------------------------------
# curvature profiles


@dataclass(frozen=True)
class CurvatureProfile:
    a: RadialFunction
    b: RadialFunction
    T1: float
    C1: float
    C2: float
    C3: float
    C4: float
    Qexp: float
    b_monotonicity: str
    t_flat: float
    family: str = "custom"
    params: dict = field(default_factory=dict)
    scan_radius: float = 100.0

    def check_invariants(self, t_max: float | None = None, samples: int = 4001) -> None:
        """Raise :class:`ProfileError` if b >= a >= 0, flatness or monotonicity fail."""
        t_max = self.scan_radius if t_max is None else t_max
        t = np.linspace(0.0, t_max, samples)
        a, b = self.a(t), self.b(t)
        if np.any(a < 0) or np.any(b < a * (1 - 1e-12)):
            i = int(np.argmin(np.minimum(a, b - a)))
            raise ProfileError(f"need b >= a >= 0; at t={t[i]:.6g}: a={a[i]:.6g}, b={b[i]:.6g}")
        flat = np.linspace(0.0, self.t_flat, 64)
        for name, fn in (("a", self.a), ("b", self.b)):
            v = fn(flat)
            if np.ptp(v) > 1e-12 * max(1.0, abs(v[0])):
                raise ProfileError(f"{name} is not constant on [0, t_flat={self.t_flat}]")
        db = np.diff(b)
        tol = 1e-12 * np.max(np.abs(b))
        if self.b_monotonicity == "increasing" and np.any(db < -tol):
            raise ProfileError("b declared increasing but decreases on the sample lattice")
        if self.b_monotonicity == "decreasing" and np.any(db > tol):
            raise ProfileError("b declared decreasing but increases on the sample lattice")

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "params": dict(self.params),
            "T1": self.T1,
            "C1": self.C1,
            "C2": self.C2,
            "C3": self.C3,
            "C4": self.C4,
            "Q": self.Qexp,
            "b_monotonicity": self.b_monotonicity,
            "t_flat": self.t_flat,
            "a": self.a.to_dict(),
            "b": self.b.to_dict(),
        }


def _scan_constants(a, b, Q, scan_radius, C2=None, C3=None, n=20001):
    """Brute-force C2 (A2-A4) and C3 (A5) over [0, scan_radius]."""
    t = np.linspace(0.0, scan_radius, n)
    bt = b(t)
    if C2 is None:
        with np.errstate(divide="ignore", invalid="ignore"):
            b1, b2 = b(t + 1.0), b(t / 2.0)
            # 0 <= C2 * 0 holds trivially, so vanishing pairs contribute 1
            r3 = np.where(bt > 0, b1 / bt, np.where(b1 > 0, np.inf, 1.0))
            r4 = np.where(bt > 0, b2 / bt, np.where(b2 > 0, np.inf, 1.0))
        C2 = float(max(np.max(a(t)), np.max(r3), np.max(r4)))
    if C3 is None:
        C3 = float(np.min(bt * (1.0 + t) ** Q))
        if not C3 > 0:
            # no admissible constant exists; keep a nominal value so the check exhibits it
            C3 = 1.0
    return C2, C3


def build_example1(phi: float, eps: float, R0: float = 1.0, t_flat: float | None = None,
                   C2: float | None = None, C3: float | None = None,
                   scan_radius: float = 100.0) -> CurvatureProfile:
    """Bounds ``a = C1/t``, ``b ~ t^(phi-2-eps/2)`` for t >= R0 with flat caps near 0.

    ``b`` is scaled by a constant ``kappa >= 1`` so that ``b >= a`` holds down
    to ``t_flat``; both bounds are C^2 and constant on ``[0, t_flat]``.
    """
    if not phi > 1:
        raise ProfileError(f"phi must exceed 1, got {phi}")
    if not eps > 0:
        raise ProfileError(f"eps must be positive, got {eps}")
    if not eps < 2 * phi - 2:
        raise ProfileError(f"eps < 2*phi - 2 violated: {eps} >= {2 * phi - 2}")
    if not R0 > 0:
        raise ProfileError(f"R0 must be positive, got {R0}")
    t_flat = 0.5 * R0 if t_flat is None else float(t_flat)
    if not 0 < t_flat < R0:
        raise ProfileError(f"t_flat must lie in (0, R0={R0}), got {t_flat}")
    C1 = math.sqrt(phi * (phi - 1.0))
    e = phi - 2.0 - eps / 2.0
    kappa = max(1.0, C1 * t_flat ** (-(e + 1.0)))
    a = Blend(C1 / R0, PowerExp(C1, -1.0), t_flat, R0)
    b = Blend(kappa * t_flat**e, PowerExp(kappa, e), t_flat, R0)
    Q = max(0.5, -phi + 2.0 + eps / 2.0)
    C2, C3 = _scan_constants(a, b, Q, scan_radius, C2, C3)
    prof = CurvatureProfile(
        a=a, b=b, T1=R0, C1=C1, C2=C2, C3=C3, C4=eps / 4.0, Qexp=Q,
        b_monotonicity="decreasing" if e <= 0 else "increasing", t_flat=t_flat,
        family="example1", params={"phi": phi, "eps": eps, "R0": R0, "t_flat": t_flat},
        scan_radius=scan_radius,
    )
    prof.check_invariants()
    return prof


def _example2_r0(k: float, eps: float) -> float:
    g = lambda t: t ** (-1.0 - eps / 2.0) * math.exp(k * t)
    t = (1.0 + eps / 2.0) / k  # g increases beyond this point
    if g(t) > k:
        return t
    hi = 2.0 * t
    while g(hi) <= k:
        hi *= 2.0
    lo = t
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if g(mid) <= k else (lo, mid)
    return hi


def build_example2(k: float, eps: float, C1: float, t_flat: float | None = None,
                   C2: float | None = None, C3: float | None = None,
                   scan_radius: float = 100.0) -> CurvatureProfile:
    """Bounds ``a = k``, ``b = t^(-1-eps/2) e^(kt)`` for t >= r0 + 1."""
    for name, v in (("k", k), ("eps", eps), ("C1", C1)):
        if not v > 0:
            raise ProfileError(f"{name} must be positive, got {v}")
    r0 = _example2_r0(k, eps)
    if t_flat is not None and not 0 < t_flat <= r0:
        raise ProfileError(f"t_flat must lie in (0, r0={r0:.6g}]")
    t0 = r0 if t_flat is None else float(t_flat)
    branch = PowerExp(1.0, -1.0 - eps / 2.0, k)
    b = Blend(float(branch(t0)), branch, t0, r0 + 1.0)
    a = Constant(k)
    C2, C3 = _scan_constants(a, b, 0.5, scan_radius, C2, C3)
    prof = CurvatureProfile(
        a=a, b=b, T1=C1 / k, C1=C1, C2=C2, C3=C3, C4=eps / 4.0, Qexp=0.5,
        b_monotonicity="increasing", t_flat=t0, family="example2",
        params={"k": k, "eps": eps, "C1": C1, "t_flat": t0, "R0": r0 + 1.0},
        scan_radius=scan_radius,
    )
    prof.check_invariants()
    return prof


def build_constant(k: float, C1: float = 2.0, C4: float = 1.0, Q: float = 0.5,
                   C2: float | None = None, C3: float | None = None,
                   scan_radius: float = 100.0) -> CurvatureProfile:
    """Pinched constant curvature ``a = b = k`` (k = 0 is the flat plane).

    For k > 0 the tail limit (A7) holds for every C4 > 0 and (A1) for every
    C1 with T1 = C1/k, so both are free parameters here.
    """
    if k < 0:
        raise ProfileError(f"k must be nonnegative, got {k}")
    a = b = Constant(float(k))
    C2, C3 = _scan_constants(a, b, Q, scan_radius, C2, C3)
    prof = CurvatureProfile(
        a=a, b=b, T1=C1 / k if k > 0 else math.inf, C1=C1, C2=C2, C3=C3, C4=C4, Qexp=Q,
        b_monotonicity="increasing", t_flat=1.0, family="constant",
        params={"k": k, "C1": C1, "C4": C4, "Q": Q}, scan_radius=scan_radius,
    )
    prof.check_invariants()
    return prof


def profile_from_config(section: dict) -> CurvatureProfile:
    """Build a profile from a ``[curvature]`` table."""
    sec = dict(section)
    family = sec.pop("family", None)
    common = {key: sec.pop(key) for key in ("C2", "C3", "scan_radius") if key in sec}
    try:
        if family == "example1":
            return build_example1(sec.pop("phi"), sec.pop("eps"), sec.pop("R0", 1.0),
                                  sec.pop("t_flat", None), **common)
        if family == "example2":
            return build_example2(sec.pop("k"), sec.pop("eps"), sec.pop("C1"),
                                  sec.pop("t_flat", None), **common)
        if family == "constant":
            return build_constant(sec.pop("k"), sec.pop("C1", 2.0), sec.pop("C4", 1.0),
                                  sec.pop("Q", 0.5), **common)
    except KeyError as exc:
        raise ProfileError(f"[curvature] family {family!r} is missing key {exc.args[0]!r}") from None
    raise ProfileError(f"[curvature] family must be example1, example2 or constant, got {family!r}")


# ---------------------------------------------------------------------------
# warp tables


@dataclass(frozen=True, eq=False)
class WarpTable:
    radii: np.ndarray
    f: np.ndarray
    fprime: np.ndarray
    k_label: str
    k: RadialFunction | None = None

    def __post_init__(self):
        r, f, fp = self.radii, self.f, self.fprime
        if r[0] != 0.0 or f[0] != 0.0 or fp[0] != 1.0:
            raise ValueError("warp table must start with r=0, f=0, f'=1")
        if np.any(np.diff(r) <= 0):
            raise ValueError("warp radii must be strictly increasing")
        object.__setattr__(self, "_spline", CubicHermiteSpline(r, f, fp))

    @property
    def R_max(self) -> float:
        return float(self.radii[-1])

    def _check_range(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0) or np.any(r > self.R_max * (1 + 1e-12)):
            raise ValueError(f"radius outside warp table range [0, {self.R_max}]")
        return r

    def value(self, r):
        return self._spline(self._check_range(r))

    def deriv(self, r):
        return self._spline(self._check_range(r), 1)

    def second_deriv(self, r):
        r = self._check_range(r)
        if self.k is not None:
            return self.k(r) ** 2 * self._spline(r)
        return self._spline(r, 2)

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "f", "fprime"])
            for row in zip(self.radii, self.f, self.fprime):
                w.writerow([repr(float(x)) for x in row])


def jacobi_mesh(R_max: float, step: float, mesh: str = "uniform") -> np.ndarray:
    """Integration radii from 0 to R_max.

    ``uniform`` uses a fixed step; ``sinh`` places nodes at ``sinh(xi)`` for
    uniformly spaced xi, i.e. a fixed step near 0 and a fixed relative step
    far out, which keeps power-law warps cheap to tabulate at large radii.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    if mesh == "uniform":
        n = max(1, int(math.ceil(R_max / step - 1e-9)))
        return np.linspace(0.0, R_max, n + 1)
    if mesh == "sinh":
        xmax = math.asinh(R_max)
        n = max(1, int(math.ceil(xmax / step - 1e-9)))
        r = np.sinh(np.linspace(0.0, xmax, n + 1))
        r[-1] = R_max
        return r
    raise ValueError(f"unknown mesh {mesh!r}")


def integrate_jacobi(k: RadialFunction, R_max: float, step: float, mesh: str = "uniform",
                     label: str = "k") -> WarpTable:
    """Classical RK4 for ``(f, f')' = (f', k^2 f)`` from ``(0, 1)``."""
    t = jacobi_mesh(R_max, step, mesh)
    h = np.diff(t)
    k0 = np.asarray(k(t[:-1]), dtype=float)
    km = np.asarray(k(t[:-1] + 0.5 * h), dtype=float)
    k1 = np.asarray(k(t[1:]), dtype=float)
    for arr in (k0, km, k1):
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ValueError("k must be finite and nonnegative on [0, R_max]")
    q0, qm, q1 = k0**2, km**2, k1**2
    f = np.empty_like(t)
    g = np.empty_like(t)
    f[0], g[0] = 0.0, 1.0
    y, v = 0.0, 1.0
    for i in range(len(h)):
        hi = h[i]
        a1, b1 = v, q0[i] * y
        a2, b2 = v + 0.5 * hi * b1, qm[i] * (y + 0.5 * hi * a1)
        a3, b3 = v + 0.5 * hi * b2, qm[i] * (y + 0.5 * hi * a2)
        a4, b4 = v + hi * b3, q1[i] * (y + hi * a3)
        y = y + hi / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        v = v + hi / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        f[i + 1], g[i + 1] = y, v
    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
        bad = int(np.argmax(~(np.isfinite(f) & np.isfinite(g))))
        raise JacobiBlowupError(f"warp overflowed near r={t[bad]:.6g}; reduce R_max below it")
    return WarpTable(t, f, g, label, k)


def warp_from_function(radii, f, fprime, label="custom") -> WarpTable:
    """Wrap an arbitrary tabulated warp (curvature then uses second differences)."""
    return WarpTable(np.asarray(radii, float), np.asarray(f, float), np.asarray(fprime, float), label)


# ---------------------------------------------------------------------------
# model surfaces


@dataclass(frozen=True, eq=False)
class ModelSurface:
    warp: WarpTable
    R_max: float | None = None
    n_for_constants: int = 2

    def __post_init__(self):
        if self.R_max is None:
            object.__setattr__(self, "R_max", self.warp.R_max)
        if self.R_max > self.warp.R_max * (1 + 1e-12):
            raise ValueError("surface radius exceeds the warp table")
        if self.n_for_constants < 2:
            raise ValueError("n_for_constants must be >= 2")

    def f(self, r):
        return self.warp.value(r)

    def fprime(self, r):
        return self.warp.deriv(r)

    def log_deriv(self, r):
        """``f'/f``, which is also the Laplacian of the distance to the pole."""
        return self.warp.deriv(r) / self.warp.value(r)


def surface_curvature(surface: ModelSurface, r):
    """Gaussian curvature ``-f''/f`` of the model metric."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0) or np.any(r > surface.R_max):
        raise ValueError(f"radius must lie in (0, {surface.R_max}]")
    w = surface.warp
    if w.k is not None:
        return -w.k(r) ** 2
    # generic warps: second differences of the interpolant
    h = 1e-4 * np.maximum(r, 1e-3)
    lo = np.maximum(r - h, 0.0)
    hi = np.minimum(r + h, w.R_max)
    mid = 0.5 * (lo + hi)
    fpp = (w.value(hi) - 2.0 * w.value(mid) + w.value(lo)) / (0.5 * (hi - lo)) ** 2
    return -fpp / w.value(mid)


# ---------------------------------------------------------------------------
# assumption checks


@dataclass(frozen=True)
class Verdict:
    name: str
    passed: bool
    t: float
    lhs: float
    rhs: float
    margin: float
    note: str = ""

    def to_dict(self):
        return {"name": self.name, "passed": self.passed, "witness": {"t": self.t, "lhs": self.lhs, "rhs": self.rhs},
                "margin": self.margin, "note": self.note}


@dataclass(frozen=True)
class AssumptionReport:
    verdicts: tuple
    sample_count: int
    t_max: float

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def __getitem__(self, name) -> Verdict:
        for v in self.verdicts:
            if v.name == name:
                return v
        raise KeyError(name)

    def to_dict(self):
        return {"passed": self.passed, "sample_count": self.sample_count, "t_max": self.t_max,
                "assumptions": [v.to_dict() for v in self.verdicts]}


def _inequality(name, t, lhs, rhs, note=""):
    """Verdict for ``lhs <= rhs`` at every sample; witness = worst margin."""
    margin = rhs - lhs
    scale = np.maximum(1.0, np.abs(rhs))
    i = int(np.argmin(margin / scale))
    ok = bool(np.all(margin >= -1e-12 * scale))
    return Verdict(name, ok, float(t[i]), float(lhs[i]), float(rhs[i]), float(margin[i]), note)


def _tail_limit(name, t, q, tail_tol, min_slope):
    """Numerical stand-in for ``lim q = 0`` on the last sampled decade."""
    T = t[-1]
    sel = t >= T / 10.0
    tt, qq = t[sel], np.abs(q[sel])
    if not np.all(np.isfinite(qq)):
        i = int(np.argmax(~np.isfinite(qq)))
        return Verdict(name, False, float(tt[i]), float("nan"), 0.0, float("-inf"), "quotient undefined")
    rises = np.diff(qq) > 1e-12 * np.maximum(qq[:-1], 1e-300)
    if np.any(rises):
        i = int(np.argmax(rises)) + 1
        return Verdict(name, False, float(tt[i]), float(qq[i]), float(qq[i - 1]), float(qq[i - 1] - qq[i]),
                       "quotient increases on the tail decade")
    if qq[-1] < tail_tol:
        return Verdict(name, True, float(T), float(qq[-1]), tail_tol, float(tail_tol - qq[-1]), "below tolerance")
    slope = float(np.polyfit(np.log(tt), np.log(qq), 1)[0])
    ok = slope <= -min_slope
    return Verdict(name, ok, float(T), slope, -min_slope, float(-min_slope - slope),
                   "witness lhs is the log-log decay slope on the tail decade")


def check_assumptions(profile: CurvatureProfile, warp_a: WarpTable, sample_count: int = 1000,
                      tail_tol: float = 1e-3, min_slope: float = 0.05,
                      t_max: float | None = None) -> AssumptionReport:
    """Verify (A1)-(A7) on ``sample_count`` uniform samples of [0, t_max]."""
    if sample_count < 100:
        raise ValueError("sample_count must be at least 100")
    if warp_a.k is None or warp_a.k.to_dict() != profile.a.to_dict():
        raise ValueError("warp table was not generated from profile.a")
    T = warp_a.R_max if t_max is None else min(float(t_max), warp_a.R_max)
    t = np.linspace(0.0, T, sample_count)
    a, b = profile.a(t), profile.b(t)
    C1, C2, C3, Q = profile.C1, profile.C2, profile.C3, profile.Qexp
    out = []

    tail = t >= profile.T1
    if not np.any(tail):
        out.append(Verdict("A1", False, float(T), 0.0, profile.T1, float("-inf"), "no samples beyond T1"))
    elif profile.b_monotonicity == "decreasing":
        tt, at = t[tail], a[tail]
        dev = np.abs(at - C1 / tt)
        i = int(np.argmax(dev / (C1 / tt)))
        ok = bool(np.all(dev <= 1e-9 * C1 / tt))
        out.append(Verdict("A1", ok, float(tt[i]), float(at[i]), float(C1 / tt[i]), float(-dev[i]), "equality branch"))
    else:
        out.append(_inequality("A1", t[tail], C1 / t[tail], a[tail], "a >= C1/t"))

    out.append(_inequality("A2", t, a, np.full_like(t, C2)))
    out.append(_inequality("A3", t, profile.b(t + 1.0), C2 * b))
    out.append(_inequality("A4", t, profile.b(t / 2.0), C2 * b))

    rhs5 = C3 * (1.0 + t) ** (-Q)
    v5 = _inequality("A5", t, rhs5, b)  # b >= C3 (1+t)^-Q
    # report lhs/rhs in the natural order b vs C3(1+t)^-Q
    v5 = Verdict("A5", v5.passed and C3 > 0 and 0 < Q < 1, v5.t, float(profile.b(np.array(v5.t))),
                 float(C3 * (1 + v5.t) ** (-Q)), v5.margin, "b(t) >= C3 (1+t)^-Q")
    out.append(v5)

    pos = t > 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        q6 = profile.b.deriv(t[pos]) / b[pos] ** 2
        q6 = np.where(profile.b.deriv(t[pos]) == 0, 0.0, q6)
        q7 = t[pos] ** (1.0 + profile.C4) * b[pos] / warp_a.deriv(t[pos])
    out.append(_tail_limit("A6", t[pos], q6, tail_tol, min_slope))
    out.append(_tail_limit("A7", t[pos], q7, tail_tol, min_slope))
    return AssumptionReport(tuple(out), sample_count, float(T))
