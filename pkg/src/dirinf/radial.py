"""Radial function specs used as curvature bounds.

Every spec is a small immutable object evaluating value and first
derivative on arrays, and serializing itself to a plain dict so profiles
can round-trip through configuration files.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class RadialFunction:
    """Base class: ``f(t)`` and ``f.deriv(t)`` for t >= 0."""

    def __call__(self, t):
        raise NotImplementedError

    def deriv(self, t):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(RadialFunction):
    c: float

    def __call__(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.c)

    def deriv(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def to_dict(self):
        return {"kind": "constant", "c": self.c}


@dataclass(frozen=True)
class PowerExp(RadialFunction):
    """``coef * t**power * exp(rate * t)``; only evaluated away from 0."""

    coef: float
    power: float
    rate: float = 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return self.coef * t**self.power * np.exp(self.rate * t)

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return self(t) * (self.power / t + self.rate)

    def to_dict(self):
        return {"kind": "power_exp", "coef": self.coef, "power": self.power, "rate": self.rate}


def smootherstep(s):
    """C^2 monotone step 6s^5 - 15s^4 + 10s^3, clamped to [0, 1]."""
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (10.0 + s * (-15.0 + 6.0 * s))


def smootherstep_deriv(s):
    inside = (s > 0.0) & (s < 1.0)
    s = np.clip(s, 0.0, 1.0)
    return np.where(inside, 30.0 * s**2 * (1.0 - s) ** 2, 0.0)


@dataclass(frozen=True)
class Blend(RadialFunction):
    """Constant ``cap`` on [0, t0], ``branch`` on [t1, inf), C^2 join between."""

    cap: float
    branch: RadialFunction
    t0: float
    t1: float

    def __post_init__(self):
        if not 0.0 < self.t0 < self.t1:
            raise ValueError(f"blend window must satisfy 0 < t0 < t1, got ({self.t0}, {self.t1})")

    def _weight(self, t):
        s = (t - self.t0) / (self.t1 - self.t0)
        return smootherstep(s), smootherstep_deriv(s) / (self.t1 - self.t0)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        w, _ = self._weight(t)
        # the branch may be singular at 0; it carries no weight there
        br = np.where(t >= self.t0, self.branch(np.maximum(t, self.t0)), 0.0)
        return (1.0 - w) * self.cap + w * br

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        w, dw = self._weight(t)
        tt = np.maximum(t, self.t0)
        br = np.where(t >= self.t0, self.branch(tt), 0.0)
        dbr = np.where(t >= self.t0, self.branch.deriv(tt), 0.0)
        return dw * (br - self.cap) + w * dbr

    def to_dict(self):
        return {
            "kind": "blend",
            "cap": self.cap,
            "t0": self.t0,
            "t1": self.t1,
            "branch": self.branch.to_dict(),
        }


def radial_from_dict(d: dict) -> RadialFunction:
    kind = d.get("kind")
    if kind == "constant":
        return Constant(float(d["c"]))
    if kind == "power_exp":
        return PowerExp(float(d["coef"]), float(d["power"]), float(d.get("rate", 0.0)))
    if kind == "blend":
        return Blend(float(d["cap"]), radial_from_dict(d["branch"]), float(d["t0"]), float(d["t1"]))
    raise ValueError(f"unknown radial function kind {kind!r}")
