"""Directional pattern bank built from the 38.901 element pattern.

Each pattern is the single-element pattern with a configurable HPBW, steered
to one of N_p boresight axes by an exact 3-D rotation. Entries of ``C`` are
the linear multipliers the channel applies per grid direction; with the
default ``gain_law="power"`` that is 10^(A/10) of the element attenuation A.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, asdict
from functools import lru_cache
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .geometry import AngleDeg, AngleGrid, grid_angles

__all__ = [
    "ElementPatternParams",
    "PatternBankConfig",
    "PatternBank",
    "FrameAngle",
    "axis_angles",
    "element_attenuation_db",
    "element_gain",
    "rotate_to_boresight",
    "rotate_grid",
    "solid_angle_weights",
    "normalize_columns",
    "build_bank",
    "build_omni_bank",
    "save_bank",
    "load_bank",
    "BANK_MAGIC",
]

GAIN_LAWS = ("power", "amplitude")
BANK_MAGIC = b"RPRBANK1"
# columns with a smaller norm are left unscaled in C_N
_TINY_COLUMN = 1e-12


@dataclass(frozen=True)
class ElementPatternParams:
    hpbw_deg: float = 65.0
    sla_db: float = 30.0
    a_max_db: float = 30.0
    # "power": C = 10^(A/10); "amplitude": C = 10^(A/20)
    gain_law: str = "power"

    def __post_init__(self):
        if not self.hpbw_deg > 0:
            raise ValueError("hpbw_deg must be positive")
        if not self.sla_db > 0 or not self.a_max_db > 0:
            raise ValueError("attenuation floors must be positive")
        if self.gain_law not in GAIN_LAWS:
            raise ValueError(f"gain_law must be one of {GAIN_LAWS}")


@dataclass(frozen=True)
class PatternBankConfig:
    n_p_azi: int = 7
    n_p_ele: int = 7
    element: ElementPatternParams = field(default_factory=ElementPatternParams)
    grid: AngleGrid = field(default_factory=AngleGrid)

    def __post_init__(self):
        if self.n_p_azi < 2 or self.n_p_ele < 2:
            raise ValueError("pattern bank needs at least 2 axes per dimension")

    @property
    def n_p(self) -> int:
        return self.n_p_azi * self.n_p_ele


class FrameAngle(NamedTuple):
    """Direction in a boresight frame; azimuth may fall anywhere in (-180, 180]."""

    elevation: float
    azimuth: float


def axis_angles(n_p: int, cfg: PatternBankConfig) -> AngleDeg:
    n_p = int(n_p)
    if not 0 <= n_p < cfg.n_p:
        raise IndexError(f"pattern index {n_p} outside [0, {cfg.n_p})")
    step_el = int(np.floor(180 / (cfg.n_p_ele - 1) + 0.5))
    step_az = int(np.floor(180 / (cfg.n_p_azi - 1) + 0.5))
    el = (n_p // cfg.n_p_azi) * step_el - 90
    az = (n_p % cfg.n_p_azi) * step_az
    # rounding can overshoot the edge for some sizes (8 axes: 7*26 = 182)
    return AngleDeg(min(el, 90), min(az, 180))


def element_attenuation_db(el_off, az_off, p: ElementPatternParams):
    """38.901 single-element attenuation (dB, <= 0) at offsets from boresight."""
    el_off = np.asarray(el_off, dtype=float)
    az_off = np.asarray(az_off, dtype=float)
    a_v = -np.minimum(12.0 * (el_off / p.hpbw_deg) ** 2, p.sla_db)
    a_h = -np.minimum(12.0 * (az_off / p.hpbw_deg) ** 2, p.a_max_db)
    return -np.minimum(-(a_v + a_h), p.a_max_db)


def element_gain(elevation, azimuth, p: ElementPatternParams):
    """Linear (unnormalised) gain at a direction given in the boresight frame.

    The boresight is (0, 90); azimuth offsets are wrapped into [-180, 180).
    Boresight gain is 1.
    """
    az_off = (np.asarray(azimuth, dtype=float) - 90.0 + 180.0) % 360.0 - 180.0
    att = element_attenuation_db(elevation, az_off, p)
    scale = 10.0 if p.gain_law == "power" else 20.0
    return 10.0 ** (att / scale)


def rotate_grid(elevation, azimuth, axis: AngleDeg):
    """Express directions in the frame whose boresight (0, 90) points along ``axis``.

    The frame is obtained from the reference by a rotation about z by
    (axis.az - 90) followed by one about the rotated y by axis.el; this applies
    the inverse of that rotation to each direction. Returns (el, az) arrays.
    """
    el = np.radians(np.asarray(elevation, dtype=float))
    az = np.radians(np.asarray(azimuth, dtype=float))
    x = np.cos(el) * np.sin(az)
    y = np.cos(el) * np.cos(az)
    z = np.sin(el)

    da = np.radians(axis.azimuth - 90.0)
    ca, sa = np.cos(da), np.sin(da)
    x1 = x * ca - y * sa
    y1 = x * sa + y * ca

    de = np.radians(axis.elevation)
    ce, se = np.cos(de), np.sin(de)
    x2 = x1 * ce + z * se
    z2 = -x1 * se + z * ce

    el_r = np.degrees(np.arcsin(np.clip(z2, -1.0, 1.0)))
    az_r = np.degrees(np.arctan2(x2, y1))
    pole = np.hypot(x2, y1) < 1e-12
    az_r = np.where(pole, 90.0, az_r)
    # arctan2 gives [-180, 180]; fold -180 onto 180 so the range is (-180, 180]
    az_r = np.where(az_r == -180.0, 180.0, az_r)
    return el_r, az_r


def rotate_to_boresight(grid_angle: AngleDeg, axis: AngleDeg) -> FrameAngle:
    el, az = rotate_grid(grid_angle.elevation, grid_angle.azimuth, axis)
    return FrameAngle(float(el), float(az))


def solid_angle_weights(grid: AngleGrid = AngleGrid()) -> np.ndarray:
    """cos(el)*dEl*dAz per grid point (1 degree steps, radians)."""
    el, _ = grid_angles(grid)
    return np.cos(np.radians(el)) * np.radians(1.0) ** 2


def normalize_columns(C: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(C, axis=0)
    norms = np.where(norms < _TINY_COLUMN, 1.0, norms)
    return C / norms


@dataclass(frozen=True, eq=False)
class PatternBank:
    config: PatternBankConfig
    C: np.ndarray
    C_N: np.ndarray
    axes: tuple

    @property
    def n_p(self) -> int:
        return self.C.shape[0]

    @classmethod
    def from_matrix(cls, C, config: PatternBankConfig, normalize: bool = False):
        """Wrap an externally supplied gain matrix (e.g. measured patterns)."""
        C = np.array(C, dtype=float)
        if C.shape != (config.n_p, config.grid.total):
            raise ValueError(f"C has shape {C.shape}, expected {(config.n_p, config.grid.total)}")
        if np.any(C < 0) or not np.all(np.isfinite(C)):
            raise ValueError("pattern gains must be finite and nonnegative")
        if normalize:
            C = _normalize_rows(C, config.grid)
        C.setflags(write=False)
        C_N = normalize_columns(C)
        C_N.setflags(write=False)
        axes = tuple(axis_angles(i, config) for i in range(config.n_p))
        return cls(config, C, C_N, axes)


def _normalize_rows(C, grid):
    w = solid_angle_weights(grid)
    energy = (C**2 * w).sum(axis=1, keepdims=True)
    if np.any(energy <= 0):
        raise ValueError("pattern with zero energy cannot be normalised")
    return C / np.sqrt(energy)


@lru_cache(maxsize=16)
def build_bank(cfg: PatternBankConfig) -> PatternBank:
    """Build C row by row; cached because banks are immutable and costly."""
    el, az = grid_angles(cfg.grid)
    C = np.empty((cfg.n_p, cfg.grid.total))
    for n in range(cfg.n_p):
        el_r, az_r = rotate_grid(el, az, axis_angles(n, cfg))
        C[n] = element_gain(el_r, az_r, cfg.element)
    return PatternBank.from_matrix(_normalize_rows(C, cfg.grid), cfg)


def build_omni_bank(cfg: PatternBankConfig) -> PatternBank:
    """Bank whose every pattern is the same constant, power-normalised gain."""
    C = np.ones((cfg.n_p, cfg.grid.total))
    return PatternBank.from_matrix(_normalize_rows(C, cfg.grid), cfg)


# --- file format -----------------------------------------------------------
#
#   magic      8 bytes  b"RPRBANK1"
#   hdr_len    uint32 little-endian
#   header     hdr_len bytes of UTF-8 JSON (keys below)
#   payload    n_p * n_a float64 little-endian, row-major (pattern-major)


def save_bank(bank: PatternBank, path) -> Path:
    cfg = bank.config
    header = {
        "format": "rprfas-pattern-bank",
        "version": 1,
        "n_p_azi": cfg.n_p_azi,
        "n_p_ele": cfg.n_p_ele,
        "grid_n_azi": cfg.grid.n_azi,
        "grid_n_ele": cfg.grid.n_ele,
        "element": asdict(cfg.element),
        "dtype": "<f8",
        "order": "row-major",
    }
    blob = json.dumps(header, sort_keys=True).encode()
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(BANK_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(bank.C, dtype="<f8").tobytes())
    return path


def load_bank(path) -> PatternBank:
    path = Path(path)
    with path.open("rb") as fh:
        if fh.read(len(BANK_MAGIC)) != BANK_MAGIC:
            raise ValueError(f"{path}: not a pattern bank file")
        (n,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(n))
        payload = fh.read()
    if header.get("version") != 1:
        raise ValueError(f"{path}: unsupported bank version {header.get('version')}")
    cfg = PatternBankConfig(
        n_p_azi=header["n_p_azi"],
        n_p_ele=header["n_p_ele"],
        element=ElementPatternParams(**header["element"]),
        grid=AngleGrid(header["grid_n_azi"], header["grid_n_ele"]),
    )
    C = np.frombuffer(payload, dtype="<f8")
    if C.size != cfg.n_p * cfg.grid.total:
        raise ValueError(f"{path}: payload has {C.size} values, expected {cfg.n_p * cfg.grid.total}")
    return PatternBank.from_matrix(C.reshape(cfg.n_p, cfg.grid.total), cfg)
