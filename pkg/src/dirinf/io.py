"""Deterministic JSON and CSV artifacts."""

from __future__ import annotations

import json
import math
import platform
from importlib import metadata
from pathlib import Path

import numpy as np


def to_jsonable(obj):
    """Plain Python types; nonfinite floats become None so the JSON stays standard."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(dumps(obj))
    return p


def read_json(path):
    return json.loads(Path(path).read_text())


def write_table_csv(path, columns: dict) -> Path:
    """Columns of equal length; floats written with repr so they round-trip."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns)
    cols = [np.asarray(columns[k]).ravel() for k in names]
    if len({c.size for c in cols}) > 1:
        raise ValueError("columns must have equal length")
    with open(p, "w") as fh:
        fh.write(",".join(names) + "\n")
        for row in zip(*cols):
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
    return p


def field_name(R: float) -> str:
    """fields/u_0004.csv for R = 4; non-integer radii keep their decimals (u_0002p5)."""
    if float(R).is_integer():
        return f"u_{int(R):04d}.csv"
    whole, frac = f"{float(R):.6f}".rstrip("0").split(".")
    return f"u_{int(whole):04d}p{frac}.csv"


def versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("dirinf", "numpy", "scipy", "pyamg", "tomli"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out
