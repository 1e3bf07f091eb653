"""Angle grid, index/angle maps and UPA steering vectors.

Angles are kept in degrees everywhere and only converted to radians inside
the trigonometric evaluations. Elevation is measured from the xy-plane
(positive towards +z), azimuth from the +y axis towards +x, so that the array
boresight sits at elevation 0, azimuth 90.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "AngleDeg",
    "AngleGrid",
    "UpaShape",
    "index_to_angles",
    "angles_to_index",
    "nearest_index",
    "grid_angles",
    "round_half_up",
    "steering_vector",
    "steering_vectors",
    "steering_matrix_grid",
]


def round_half_up(x):
    """Round to the closest integer, halves away from -inf (0.5 -> 1, -0.5 -> 0).

    numpy's rint rounds half to even which makes the metric brackets depend on
    parity; this keeps the rule uniform.
    """
    return np.floor(np.asarray(x, dtype=float) + 0.5)


@dataclass(frozen=True)
class AngleDeg:
    elevation: float
    azimuth: float

    def __post_init__(self):
        el, az = float(self.elevation), float(self.azimuth)
        if not (-90.0 <= el <= 90.0) or not np.isfinite(el):
            raise ValueError(f"elevation {el!r} outside [-90, 90]")
        if not (0.0 <= az <= 180.0) or not np.isfinite(az):
            raise ValueError(f"azimuth {az!r} outside [0, 180]")
        object.__setattr__(self, "elevation", el)
        object.__setattr__(self, "azimuth", az)

    def as_tuple(self):
        return (self.elevation, self.azimuth)


@dataclass(frozen=True)
class AngleGrid:
    """1-degree lattice: rows are elevations starting at -90, columns azimuths from 0."""

    n_azi: int = 181
    n_ele: int = 181

    def __post_init__(self):
        if self.n_azi < 1 or self.n_ele < 1:
            raise ValueError("grid dimensions must be positive")

    @property
    def total(self) -> int:
        return self.n_azi * self.n_ele

    @property
    def shape(self):
        """(rows, cols) = (elevation count, azimuth count) of the grid image."""
        return (self.n_ele, self.n_azi)


@dataclass(frozen=True)
class UpaShape:
    n_azi: int = 1
    n_ele: int = 1

    def __post_init__(self):
        if self.n_azi < 1 or self.n_ele < 1:
            raise ValueError("UPA dimensions must be >= 1")

    @property
    def total(self) -> int:
        return self.n_azi * self.n_ele


def index_to_angles(n_a: int, grid: AngleGrid = AngleGrid()) -> AngleDeg:
    n_a = int(n_a)
    if not 0 <= n_a < grid.total:
        raise IndexError(f"grid index {n_a} outside [0, {grid.total})")
    return AngleDeg(n_a // grid.n_azi - 90, n_a % grid.n_azi)


def angles_to_index(angle: AngleDeg, grid: AngleGrid = AngleGrid()) -> int:
    """Exact inverse of index_to_angles; the angle must sit on the lattice."""
    el, az = angle.elevation, angle.azimuth
    if el != int(el) or az != int(az):
        raise ValueError(f"{angle} is not a grid angle; use nearest_index")
    row, col = int(el) + 90, int(az)
    if not (0 <= row < grid.n_ele and 0 <= col < grid.n_azi):
        raise IndexError(f"{angle} outside the grid")
    return row * grid.n_azi + col


def nearest_index(elevation, azimuth, grid: AngleGrid = AngleGrid()):
    """Grid index of the nearest lattice point (vectorised, clipped to the grid)."""
    row = np.clip(round_half_up(elevation) + 90, 0, grid.n_ele - 1).astype(np.int64)
    col = np.clip(round_half_up(azimuth), 0, grid.n_azi - 1).astype(np.int64)
    out = row * grid.n_azi + col
    return int(out) if out.ndim == 0 else out


@lru_cache(maxsize=8)
def _grid_angles(grid: AngleGrid):
    n = np.arange(grid.total)
    el = (n // grid.n_azi - 90).astype(float)
    az = (n % grid.n_azi).astype(float)
    el.setflags(write=False)
    az.setflags(write=False)
    return el, az


def grid_angles(grid: AngleGrid = AngleGrid()):
    """(elevation, azimuth) arrays in degrees for every grid index."""
    return _grid_angles(grid)


def steering_vectors(shape: UpaShape, elevation, azimuth) -> np.ndarray:
    """Steering vectors for arrays of angles; output shape (..., shape.total)."""
    el = np.radians(np.asarray(elevation, dtype=float))[..., None]
    az = np.radians(np.asarray(azimuth, dtype=float))[..., None]
    n = np.arange(shape.total)
    n_azi = n % shape.n_azi
    n_ele = n // shape.n_azi
    phase = np.pi * (n_azi * np.cos(el) * np.cos(az) + n_ele * np.sin(el))
    return np.exp(1j * phase)


def steering_vector(shape: UpaShape, angle: AngleDeg) -> np.ndarray:
    return steering_vectors(shape, angle.elevation, angle.azimuth)


@lru_cache(maxsize=8)
def _steering_matrix_grid(shape: UpaShape, grid: AngleGrid):
    el, az = grid_angles(grid)
    out = steering_vectors(shape, el, az)
    out.setflags(write=False)
    return out


def steering_matrix_grid(shape: UpaShape, grid: AngleGrid = AngleGrid()) -> np.ndarray:
    """N_a x N_U matrix whose row n_a is the steering vector at grid index n_a.

    Cached and read-only since every trial reuses it.
    """
    return _steering_matrix_grid(shape, grid)
