"""Scalar-coefficient divergence operators ``Q[u] = div A(|grad u|^2) grad u``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    """Evaluators for A, B = A'/A and the energy density Phi (2 Phi' = A).

    ``dA_eval`` is the analytic derivative of A; the Newton Hessian needs it.
    """

    name: str
    A_eval: Callable
    B_eval: Callable
    A0: float
    p: float
    B0: float
    energy_density: Callable
    dA_eval: Callable
    params: dict | None = None
    energy_increment: Callable | None = None

    def increment(self, s0, s1):
        """``Phi(s1) - Phi(s0)``, cancellation-free when a closed form is known."""
        if self.energy_increment is not None:
            return self.energy_increment(s0, s1)
        return self.energy_density(s1) - self.energy_density(s0)

    def to_dict(self) -> dict:
        return {"name": self.name, "A0": self.A0, "p": self.p, "B0": self.B0, "params": dict(self.params or {})}

    @property
    def is_linear(self) -> bool:
        return self.name == "plaplace" and self.p == 2.0


def minimal_graph_operator() -> OperatorSpec:
    def A(t):
        return 1.0 / np.sqrt(1.0 + np.asarray(t, float))

    def dA(t):
        return -0.5 * (1.0 + np.asarray(t, float)) ** -1.5

    def B(t):
        return -0.5 / (1.0 + np.asarray(t, float))

    def Phi(s):
        s = np.asarray(s, float)
        # sqrt(1+s) - 1 without cancellation for small s
        return s / (np.sqrt(1.0 + s) + 1.0)

    def dPhi(s0, s1):
        return (s1 - s0) / (np.sqrt(1.0 + s1) + np.sqrt(1.0 + s0))

    return OperatorSpec("minimal", A, B, 1.0, 2.0, 0.0, Phi, dA, {}, dPhi)


def p_laplace_operator(p: float) -> OperatorSpec:
    p = float(p)
    if not p > 1.0:
        raise ValueError(f"p-Laplacian needs p > 1 (the lower B bound is not strict at p = 1), got {p}")
    e = (p - 2.0) / 2.0

    def A(t):
        t = np.asarray(t, float)
        if e == 0.0:
            return np.ones_like(t)
        with np.errstate(divide="ignore"):
            return t**e

    def dA(t):
        t = np.asarray(t, float)
        if e == 0.0:
            return np.zeros_like(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            return e * t ** (e - 1.0)

    def B(t):
        t = np.asarray(t, float)
        with np.errstate(divide="ignore"):
            return e / t if e != 0.0 else np.zeros_like(t)

    def Phi(s):
        return np.asarray(s, float) ** (p / 2.0) / p

    inc = (lambda s0, s1: 0.5 * (s1 - s0)) if e == 0.0 else None
    return OperatorSpec("plaplace", A, B, 1.0, p, e, Phi, dA, {"p": p}, inc)


def custom_operator(pieces, breaks=(), power_coef: float = 0.0, power_exp: float = 0.0,
                    A0: float = 1.0, p: float = 2.0, B0: float = 0.0) -> OperatorSpec:
    """``A(t) = poly_j(t) + power_coef * t**power_exp`` with poly_j on [breaks[j-1], breaks[j]).

    ``pieces`` holds ascending-order coefficient lists; derivative and energy
    are obtained by exact polynomial calculus, never numerically.
    """
    polys = [np.polynomial.Polynomial(np.asarray(c, float)) for c in pieces]
    breaks = np.asarray(breaks, float)
    if len(polys) != len(breaks) + 1:
        raise ValueError("need exactly one more polynomial piece than breakpoints")
    if np.any(np.diff(breaks) <= 0) or np.any(breaks <= 0):
        raise ValueError("breakpoints must be positive and increasing")
    if power_coef != 0.0 and not power_exp > -1.0:
        raise ValueError("power term needs exponent > -1 for a finite energy")
    ders = [q.deriv() for q in polys]
    ints = [q.integ() for q in polys]
    # energy offsets so that the antiderivative is continuous across breaks
    offsets = [0.0]
    for j, x in enumerate(breaks):
        offsets.append(offsets[-1] + ints[j](x) - ints[j + 1](x))

    def _piecewise(fns, t, add=None):
        t = np.asarray(t, float)
        idx = np.searchsorted(breaks, t, side="right")
        out = np.zeros_like(t)
        for j, fn in enumerate(fns):
            m = idx == j
            if np.any(m):
                out[m] = fn(t[m]) + (add[j] if add is not None else 0.0)
        return out

    def _pow(t, k=0):
        if power_coef == 0.0:
            return np.zeros_like(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            if k == 0:
                return power_coef * t**power_exp
            if k == 1:
                return power_coef * power_exp * t ** (power_exp - 1.0)
            return power_coef * t ** (power_exp + 1.0) / (power_exp + 1.0)

    def A(t):
        t = np.asarray(t, float)
        return _piecewise(polys, t) + _pow(t)

    def dA(t):
        t = np.asarray(t, float)
        return _piecewise(ders, t) + _pow(t, 1)

    def B(t):
        return dA(t) / A(t)

    def Phi(s):
        s = np.asarray(s, float)
        return 0.5 * (_piecewise(ints, s, offsets) - ints[0](0.0) + _pow(s, 2))

    params = {"pieces": [list(map(float, c)) for c in pieces], "breaks": breaks.tolist(),
              "power_coef": power_coef, "power_exp": power_exp}
    return OperatorSpec("custom", A, B, float(A0), float(p), float(B0), Phi, dA, params)


def operator_from_config(section: dict) -> OperatorSpec:
    kind = section.get("kind")
    if kind == "minimal":
        return minimal_graph_operator()
    if kind == "plaplace":
        if "p" not in section:
            raise ValueError("[operator] kind 'plaplace' requires key 'p'")
        return p_laplace_operator(section["p"])
    if kind == "custom":
        if "pieces" not in section:
            raise ValueError("[operator] kind 'custom' requires key 'pieces'")
        keys = ("breaks", "power_coef", "power_exp", "A0", "p", "B0")
        return custom_operator(section["pieces"], **{k: section[k] for k in keys if k in section})
    raise ValueError(f"[operator] kind must be minimal, plaplace or custom, got {kind!r}")


def flux(spec: OperatorSpec, gradient) -> np.ndarray:
    """``A(|g|^2) g`` for vectors stacked on the last axis; zero maps to zero."""
    g = np.asarray(gradient, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("nonfinite gradient")
    s = np.sum(g * g, axis=-1)
    nz = s > 0
    coef = np.zeros_like(s)
    coef[nz] = spec.A_eval(s[nz])
    return coef[..., None] * g


@dataclass(frozen=True)
class GrowthCheck:
    name: str
    passed: bool
    t: float
    lhs: float
    rhs: float


@dataclass(frozen=True)
class GrowthReport:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {"passed": self.passed,
                "checks": [{"name": c.name, "passed": c.passed, "witness": {"t": c.t, "lhs": c.lhs, "rhs": c.rhs}}
                           for c in self.checks]}


def _worst(name, t, lhs, rhs, strict=False):
    """Check lhs <= rhs (or <) everywhere; witness at the worst relative margin."""
    scale = np.maximum(np.abs(lhs), np.abs(rhs))
    scale[scale == 0] = 1.0
    rel = (rhs - lhs) / scale
    i = int(np.argmin(rel))
    ok = bool(np.all(rhs > lhs)) if strict else bool(np.all(rel >= -1e-13))
    return GrowthCheck(name, ok, float(t[i]), float(lhs[i]), float(rhs[i]))


def validate_growth(spec: OperatorSpec, lattice) -> GrowthReport:
    """Sampled growth and monotonicity conditions on the coefficient A."""
    t = np.unique(np.asarray(lattice, dtype=float))
    if t.size == 0:
        raise ValueError("empty lattice")
    if np.any(t <= 0) or not np.all(np.isfinite(t)):
        raise ValueError("lattice must be finite and positive")
    A = spec.A_eval(t)
    B = spec.B_eval(t)
    checks = [
        _worst("A_growth", t, A, spec.A0 * t ** ((spec.p - 2.0) / 2.0)),
        _worst("B_lower", t, -0.5 / t, B, strict=True),
        _worst("B_upper", t, B, spec.B0 / t),
    ]
    g = t * spec.A_eval(t * t)
    d = np.diff(g)
    if d.size:
        i = int(np.argmin(d))
        checks.append(GrowthCheck("tA(t^2)_increasing", bool(np.all(d > 0)), float(t[i + 1]), float(g[i]), float(g[i + 1])))
    else:
        checks.append(GrowthCheck("tA(t^2)_increasing", True, float(t[0]), float(g[0]), float(g[0])))
    t0 = 1e-8
    g0 = float(t0 * spec.A_eval(np.array(t0 * t0)))
    # the A bound forces t A(t^2) <= A0 t^(p-1), which only decays for p > 1
    bound = spec.A0 * t0 ** (spec.p - 1.0)
    checks.append(GrowthCheck("tA(t^2)_vanishes_at_0", bool(g0 <= bound * (1.0 + 1e-12) and bound < 1.0), t0, g0, bound))
    return GrowthReport(tuple(checks))
