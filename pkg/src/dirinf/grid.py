"""Polar grids over model surfaces and fields sampled on them."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True, eq=False)
class PolarGrid:
    """Tensor grid of ring radii times a uniform periodic angle lattice.

    ``kind="disk"``: cell-centred rings ``(i + 1/2) dr`` plus a Dirichlet ring
    at ``R``.  ``kind="annulus"``: uniform rings from ``r_inner`` to ``R`` with
    both end rings Dirichlet.  Rows of every field are rings.
    """

    Nr: int
    Ntheta: int
    R: float
    r_inner: float = 0.0
    kind: str = "disk"
    radii: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.Ntheta < 4 or self.Ntheta % 2:
            raise ValueError(f"Ntheta must be even and >= 4, got {self.Ntheta}")
        if self.Nr < 2:
            raise ValueError("Nr must be at least 2")
        if self.kind == "disk":
            if self.r_inner != 0.0:
                raise ValueError("disk grids have r_inner = 0")
            dr = self.R / self.Nr
            radii = np.append((np.arange(self.Nr) + 0.5) * dr, self.R)
        elif self.kind == "annulus":
            if not 0.0 < self.r_inner < self.R:
                raise ValueError("annulus needs 0 < r_inner < R")
            radii = np.linspace(self.r_inner, self.R, self.Nr + 1)
        else:
            raise ValueError(f"unknown grid kind {self.kind!r}")
        object.__setattr__(self, "radii", radii)

    @classmethod
    def disk(cls, Nr, Ntheta, R):
        return cls(int(Nr), int(Ntheta), float(R), 0.0, "disk")

    @classmethod
    def annulus(cls, Nr, Ntheta, r_inner, R):
        return cls(int(Nr), int(Ntheta), float(R), float(r_inner), "annulus")

    @property
    def dr(self) -> float:
        return (self.R - self.r_inner) / self.Nr

    @property
    def dtheta(self) -> float:
        return 2.0 * math.pi / self.Ntheta

    @property
    def thetas(self) -> np.ndarray:
        return np.arange(self.Ntheta) * self.dtheta

    @property
    def shape(self) -> tuple:
        return (len(self.radii), self.Ntheta)

    def boundary_rings(self) -> list:
        n = len(self.radii)
        return [n - 1] if self.kind == "disk" else [0, n - 1]

    def boundary_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[self.boundary_rings()] = True
        return m

    def check_surface(self, surface) -> None:
        if self.R > surface.R_max * (1 + 1e-12):
            raise ValueError(f"grid radius {self.R} exceeds surface R_max {surface.R_max}")
        if np.any(surface.f(self.radii) <= 0):
            raise ValueError("metric weight f must be positive on every ring")

    def to_dict(self):
        return {"kind": self.kind, "Nr": self.Nr, "Ntheta": self.Ntheta, "R": self.R, "r_inner": self.r_inner}


@dataclass(eq=False)
class PolarField:
    """Values on a grid, rows indexed by ring and columns by angle."""

    grid: object
    values: np.ndarray
    boundary: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        shape = (len(self.grid.radii), len(self.grid.thetas))
        if self.values.shape != shape:
            raise ValueError(f"field shape {self.values.shape} does not match grid {shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")
        if self.boundary is None:
            self.boundary = np.zeros(shape, dtype=bool)

    @property
    def radii(self):
        return self.grid.radii

    @property
    def thetas(self):
        return self.grid.thetas

    def copy(self) -> "PolarField":
        return PolarField(self.grid, self.values.copy(), self.boundary.copy())

    def ring_interp(self, r: float) -> np.ndarray:
        """Angular profile at radius r by linear interpolation between rings."""
        radii = self.grid.radii
        if not radii[0] <= r <= radii[-1]:
            raise ValueError(f"radius {r} outside grid rings [{radii[0]}, {radii[-1]}]")
        i = int(np.clip(np.searchsorted(radii, r) - 1, 0, len(radii) - 2))
        w = (r - radii[i]) / (radii[i + 1] - radii[i])
        return (1.0 - w) * self.values[i] + w * self.values[i + 1]

    def to_csv(self, path, name: str = "value") -> None:
        R, T = np.meshgrid(self.grid.radii, self.grid.thetas, indexing="ij")
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "theta", name])
            for row in zip(R.ravel(), T.ravel(), self.values.ravel()):
                w.writerow([repr(float(x)) for x in row])


def read_field_csv(path) -> tuple:
    """Return (radii, thetas, values) from a field CSV."""
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1)
    radii = np.unique(data[:, 0])
    thetas = np.unique(data[:, 1])
    return radii, thetas, data[:, 2].reshape(len(radii), len(thetas))
