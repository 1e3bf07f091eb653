"""Low-storage representation of the pattern gain matrix.

Each pattern row is reshaped to its (elevation x azimuth) grid image,
multiplied by a separable Hamming window and taken to the 2-D DFT domain,
where the energy concentrates in a few coefficients. Coefficients whose
magnitude is within ``threshold_db`` of the pattern's spectral peak are kept;
reconstruction inverts the DFT and divides the window back out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .geometry import AngleGrid
from .patterns import PatternBank

__all__ = [
    "CodecConfig",
    "CompressedPattern",
    "CompressedBank",
    "CodecReport",
    "compress",
    "compress_matrix",
    "reconstruct",
    "nmse_and_ratio",
    "nmse_db",
    "clamp_to_floor",
    "save_compressed",
    "load_compressed",
    "NMSE_FLOOR_DB",
    "RECORD_BYTES",
]

# reported in place of -inf for an exact reconstruction
NMSE_FLOOR_DB = -300.0
# one stored record: two uint16 indices plus a complex128 value
RECORD_BYTES = 2 * 2 + 16
_DENSE_BYTES = 8


@dataclass(frozen=True)
class CodecConfig:
    """``threshold_db`` is compared with db_factor*log10(|coef|/max|coef|).

    db_factor=10 reads the spectral magnitude as a power-like quantity, which
    is what matches the published storage figures when the bank holds power
    gains; 20 is the amplitude convention. ``-inf`` keeps every coefficient.
    """

    threshold_db: float = -30.0
    db_factor: float = 10.0

    def __post_init__(self):
        if not self.threshold_db < 0:
            raise ValueError("threshold_db must be negative")
        if self.db_factor not in (10.0, 20.0):
            raise ValueError("db_factor must be 10 or 20")


@dataclass(frozen=True, eq=False)
class CompressedPattern:
    rows: np.ndarray  # elevation-frequency index
    cols: np.ndarray  # azimuth-frequency index
    coefs: np.ndarray  # complex
    dims: tuple  # (n_ele, n_azi)

    @property
    def n_kept(self) -> int:
        return int(self.coefs.size)


@dataclass(frozen=True, eq=False)
class CompressedBank:
    patterns: tuple
    config: CodecConfig
    window: tuple  # (w_ele, w_azi)

    @property
    def n_p(self) -> int:
        return len(self.patterns)

    @property
    def dims(self) -> tuple:
        return self.patterns[0].dims if self.patterns else (0, 0)

    @property
    def n_records(self) -> int:
        return sum(p.n_kept for p in self.patterns)


class CodecReport(NamedTuple):
    nmse_db: float
    ratio: float  # kept records / (N_p * N_a)
    byte_ratio: float  # stored bytes / dense float64 bytes
    n_records: int


def _windows(dims):
    return np.hamming(dims[0]), np.hamming(dims[1])


def _keep_mask(spectrum: np.ndarray, cfg: CodecConfig) -> np.ndarray:
    mag = np.abs(spectrum)
    peak = mag.max()
    if peak == 0.0:
        return np.zeros(spectrum.shape, dtype=bool)
    if math.isinf(cfg.threshold_db):
        return np.ones(spectrum.shape, dtype=bool)
    with np.errstate(divide="ignore"):
        level = cfg.db_factor * np.log10(mag / peak)
    keep = level > cfg.threshold_db
    # close the set under k -> -k so the inverse transform stays real even when
    # rounding splits a conjugate pair across the threshold
    mirror = np.roll(keep[::-1, ::-1], 1, axis=(0, 1))
    return keep | mirror


def compress_matrix(C: np.ndarray, grid: AngleGrid, cfg: CodecConfig = CodecConfig()) -> CompressedBank:
    dims = grid.shape
    w_ele, w_azi = _windows(dims)
    W = np.outer(w_ele, w_azi)
    patterns = []
    for row in np.asarray(C, dtype=float):
        spectrum = np.fft.fft2(row.reshape(dims) * W)
        keep = _keep_mask(spectrum, cfg)
        r, c = np.nonzero(keep)
        patterns.append(CompressedPattern(r.astype(np.int64), c.astype(np.int64), spectrum[r, c], dims))
    return CompressedBank(tuple(patterns), cfg, (w_ele, w_azi))


def compress(bank: PatternBank, cfg: CodecConfig = CodecConfig()) -> CompressedBank:
    return compress_matrix(bank.C, bank.config.grid, cfg)


def reconstruct(cb: CompressedBank) -> np.ndarray:
    """C_L, one row per pattern."""
    dims = cb.dims
    W = np.outer(*cb.window)
    out = np.empty((cb.n_p, dims[0] * dims[1]))
    spectrum = np.zeros(dims, dtype=complex)
    for n, p in enumerate(cb.patterns):
        spectrum[:] = 0.0
        spectrum[p.rows, p.cols] = p.coefs
        img = np.fft.ifft2(spectrum)
        out[n] = (img.real / W).ravel()
    return out


def clamp_to_floor(C_L: np.ndarray, floor_db: float, gain_law: str = "power") -> np.ndarray:
    """Lift entries of each row to at least its peak times the element floor.

    Thresholding leaves ringing well below the pattern's attenuation clamp,
    including negative gains; every real pattern sits at or above that clamp,
    so the reconstruction can be bounded from below at no storage cost.
    """
    scale = 10.0 if gain_law == "power" else 20.0
    floor = np.asarray(C_L).max(axis=1, keepdims=True) * 10.0 ** (-floor_db / scale)
    return np.maximum(C_L, floor)


def nmse_db(C: np.ndarray, C_L: np.ndarray) -> float:
    C = np.asarray(C)
    C_L = np.asarray(C_L)
    if C.shape != C_L.shape:
        raise ValueError(f"shape mismatch {C.shape} vs {C_L.shape}")
    err = np.sum((C_L - C) ** 2)
    ref = np.sum(C**2)
    if ref == 0:
        raise ValueError("reference matrix is zero")
    if err == 0:
        return NMSE_FLOOR_DB
    return max(10.0 * math.log10(err / ref), NMSE_FLOOR_DB)


def nmse_and_ratio(C, C_L, cb: CompressedBank) -> CodecReport:
    C = np.asarray(C)
    if C.shape[0] != cb.n_p:
        raise ValueError(f"C has {C.shape[0]} patterns, compressed bank has {cb.n_p}")
    dense = C.size
    records = cb.n_records
    return CodecReport(
        nmse_db(C, C_L),
        records / dense,
        records * RECORD_BYTES / (dense * _DENSE_BYTES),
        records,
    )


# --- sparse text format -----------------------------------------------------
#
#   # rprfas-compressed-bank v1
#   # dims n_ele n_azi
#   # n_p N
#   # threshold_db T db_factor F
#   pattern,row,col,re,im
#   0,0,0,1.234e+00,0.0e+00
#   ...
#
# Floats are written with repr() so a save/load cycle is exact.


def save_compressed(cb: CompressedBank, path) -> Path:
    path = Path(path)
    n_ele, n_azi = cb.dims
    with path.open("w") as fh:
        fh.write("# rprfas-compressed-bank v1\n")
        fh.write(f"# dims {n_ele} {n_azi}\n")
        fh.write(f"# n_p {cb.n_p}\n")
        fh.write(f"# threshold_db {cb.config.threshold_db!r} db_factor {cb.config.db_factor!r}\n")
        fh.write("pattern,row,col,re,im\n")
        for n, p in enumerate(cb.patterns):
            for r, c, v in zip(p.rows, p.cols, p.coefs):
                fh.write(f"{n},{r},{c},{float(v.real)!r},{float(v.imag)!r}\n")
    return path


def load_compressed(path) -> CompressedBank:
    path = Path(path)
    meta = {}
    records = []
    with path.open() as fh:
        first = fh.readline().strip()
        if first != "# rprfas-compressed-bank v1":
            raise ValueError(f"{path}: not a compressed bank file")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                for key, val in zip(parts[::2], parts[1::2]):
                    meta[key] = val
                if parts[0] == "dims":
                    meta["dims"] = (int(parts[1]), int(parts[2]))
                continue
            if line.startswith("pattern"):
                continue
            n, r, c, re, im = line.split(",")
            records.append((int(n), int(r), int(c), float(re), float(im)))
    try:
        dims = meta["dims"]
        n_p = int(meta["n_p"])
        cfg = CodecConfig(float(meta["threshold_db"]), float(meta["db_factor"]))
    except KeyError as exc:
        raise ValueError(f"{path}: missing header field {exc}") from None

    arr = np.array(records, dtype=float).reshape(-1, 5)
    pid = arr[:, 0].astype(np.int64)
    rows = arr[:, 1].astype(np.int64)
    cols = arr[:, 2].astype(np.int64)
    if np.any((pid < 0) | (pid >= n_p)):
        raise ValueError(f"{path}: pattern id out of range")
    if np.any((rows < 0) | (rows >= dims[0]) | (cols < 0) | (cols >= dims[1])):
        raise ValueError(f"{path}: coefficient index outside {dims}")
    coefs = arr[:, 3] + 1j * arr[:, 4]
    patterns = []
    for n in range(n_p):
        sel = pid == n
        r, c, v = rows[sel], cols[sel], coefs[sel]
        if len(set(zip(r.tolist(), c.tolist()))) != r.size:
            raise ValueError(f"{path}: duplicate coefficient in pattern {n}")
        if v.size and not math.isinf(cfg.threshold_db):
            mag = np.abs(v)
            # every record must clear the threshold relative to the kept peak
            # (mirrored partners may sit a hair below it)
            level = cfg.db_factor * np.log10(np.maximum(mag, 1e-300) / mag.max())
            if np.any(level < cfg.threshold_db - 1e-6):
                raise ValueError(f"{path}: pattern {n} holds coefficients below the threshold")
        patterns.append(CompressedPattern(r, c, v, dims))
    return CompressedBank(tuple(patterns), cfg, _windows(dims))
