"""TOML run configuration with cross-section checks done before any compute."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import tomli

from .experiment import AngularData, angular_data_from_dict
from .geometry import CurvatureProfile, ModelSurface, ProfileError, WarpTable, integrate_jacobi, profile_from_config
from .operators import OperatorSpec, operator_from_config
from .solver import SolverParams


class ConfigError(ValueError):
    """Malformed or inconsistent configuration (maps to exit status 2)."""


_SECTIONS = {
    "curvature": None,
    "surface": {"R_max", "step", "mesh"},
    "operator": {"kind", "p", "pieces", "breaks", "power_coef", "power_exp", "A0", "B0"},
    "solver": {"nr", "ntheta", "R", "tol", "max_newton", "damping", "cg_tol", "armijo", "max_backtracks"},
    "barrier": {"nr", "ntheta", "r_max", "mapping", "scale", "n_random", "theta0", "L", "amplitude"},
    "experiment": {"schedule", "dr", "ntheta", "compacts", "theta0", "eps", "envelope", "f", "uniqueness_R",
                   "uniqueness_nr", "uniqueness_ntheta"},
    "check": {"t_max", "sample_count", "tail_tol"},
    "props": {"pairs", "nr", "ntheta", "R", "modes", "shift"},
}
_TOP = {"seed", "out", "n", "threads"}

DEFAULTS = {
    "seed": 0,
    "n": 2,
    "surface": {"step": 1e-3, "mesh": "uniform"},
    "operator": {"kind": "minimal"},
    "solver": {"nr": 32, "ntheta": 64, "R": 4.0},
    "barrier": {"nr": 256, "ntheta": 256, "mapping": "uniform", "scale": 1.0, "n_random": 10_000, "theta0": 0.0,
                "amplitude": 1.0},
    "experiment": {"schedule": [4.0, 8.0, 16.0], "dr": 0.125, "ntheta": 128, "compacts": [1.0, 2.0, 4.0],
                   "theta0": 0.0, "eps": 0.2, "envelope": True, "f": {"kind": "cos"}, "uniqueness_R": 4.0,
                   "uniqueness_nr": 32, "uniqueness_ntheta": 64},
    "check": {"sample_count": 1000, "tail_tol": 1e-3},
    "props": {"pairs": 20, "nr": 32, "ntheta": 64, "R": 4.0, "modes": 5, "shift": 3.0},
}


@dataclass(eq=False)
class RunConfig:
    raw: dict
    profile: CurvatureProfile
    spec: OperatorSpec
    solver: SolverParams
    f: AngularData
    seed: int
    n: int
    out: str | None
    source: str | None = None
    _warp: WarpTable | None = field(default=None, repr=False)

    def section(self, name: str) -> dict:
        return self.raw[name]

    @property
    def R_max(self) -> float:
        return float(self.raw["surface"]["R_max"])

    def warp(self) -> WarpTable:
        if self._warp is None:
            s = self.raw["surface"]
            self._warp = integrate_jacobi(self.profile.a, float(s["R_max"]), float(s["step"]), s["mesh"])
        return self._warp

    def surface(self) -> ModelSurface:
        return ModelSurface(self.warp())


def _merge(defaults: dict, given: dict) -> dict:
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _need(sec: dict, name: str, key: str, kind):
    if key not in sec:
        raise ConfigError(f"[{name}] missing key {key!r}")
    try:
        return kind(sec[key])
    except (TypeError, ValueError):
        raise ConfigError(f"[{name}] key {key!r} must be {kind.__name__}, got {sec[key]!r}") from None


def parse_config(text: str, source: str | None = None) -> RunConfig:
    try:
        given = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{source or 'config'}: {exc}") from None
    for key, val in given.items():
        if isinstance(val, dict):
            if key not in _SECTIONS:
                raise ConfigError(f"unknown section [{key}]")
            allowed = _SECTIONS[key]
            extra = set(val) - allowed if allowed is not None else set()
            if key == "experiment":
                extra.discard("f")
            if extra:
                raise ConfigError(f"[{key}] unknown keys: {', '.join(sorted(extra))}")
        elif key not in _TOP:
            raise ConfigError(f"unknown top-level key {key!r}")
    if "curvature" not in given:
        raise ConfigError("missing section [curvature]")
    if "R_max" not in given.get("surface", {}):
        raise ConfigError("[surface] missing key 'R_max'")
    raw = _merge(DEFAULTS, given)

    try:
        profile = profile_from_config(raw["curvature"])
    except (ProfileError, ValueError, TypeError) as exc:
        raise ConfigError(f"[curvature] {exc}") from None
    try:
        spec = operator_from_config(raw["operator"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[operator] {exc}") from None
    sv = raw["solver"]
    try:
        solver = SolverParams.from_config(sv)
    except TypeError as exc:
        raise ConfigError(f"[solver] {exc}") from None
    try:
        f = angular_data_from_dict(raw["experiment"]["f"])
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"[experiment.f] {exc}") from None

    R_max = _need(raw["surface"], "surface", "R_max", float)
    if not R_max > 0:
        raise ConfigError("[surface] R_max must be positive")
    if raw["surface"]["mesh"] not in ("uniform", "sinh"):
        raise ConfigError("[surface] mesh must be 'uniform' or 'sinh'")
    R_solve = _need(sv, "solver", "R", float)
    if not 0 < R_solve <= R_max:
        raise ConfigError(f"[solver] R = {R_solve} must lie in (0, R_max = {R_max}]")
    for key in ("nr", "ntheta"):
        _need(sv, "solver", key, int)
    ex = raw["experiment"]
    sched = ex["schedule"]
    if not isinstance(sched, list) or not sched:
        raise ConfigError("[experiment] schedule must be a nonempty list")
    sched = [float(x) for x in sched]
    if any(b <= a for a, b in zip(sched, sched[1:])) or sched[0] <= 0:
        raise ConfigError("[experiment] schedule must be positive and strictly increasing")
    if sched[-1] > R_max:
        raise ConfigError(f"[experiment] schedule radius {sched[-1]} exceeds R_max = {R_max}")
    dr = _need(ex, "experiment", "dr", float)
    for R in sched:
        if abs(round(R / dr) * dr - R) > 1e-9 * R:
            raise ConfigError(f"[experiment] schedule radius {R} is not a multiple of dr = {dr}")
    if not float(ex["eps"]) > 0:
        raise ConfigError("[experiment] eps must be positive")
    if float(ex["uniqueness_R"]) > R_max:
        raise ConfigError("[experiment] uniqueness_R exceeds R_max")
    br = raw["barrier"]
    if "r_max" in br and float(br["r_max"]) > R_max:
        raise ConfigError(f"[barrier] r_max = {br['r_max']} exceeds R_max = {R_max}")
    if br["mapping"] not in ("uniform", "sinh"):
        raise ConfigError("[barrier] mapping must be 'uniform' or 'sinh'")
    if "L" in br and not float(br["L"]) > 8.0 / 3.141592653589793:
        raise ConfigError("[barrier] L must exceed 8/pi")
    if float(raw["props"]["R"]) > R_max:
        raise ConfigError("[props] R exceeds R_max")
    n = _need(raw, "config", "n", int)
    if n < 2:
        raise ConfigError("n must be at least 2")
    return RunConfig(raw=raw, profile=profile, spec=spec, solver=solver, f=f, seed=_need(raw, "config", "seed", int),
                     n=n, out=raw.get("out"), source=source)


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    return parse_config(text, str(p))
