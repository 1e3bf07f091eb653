"""Scenario realisations: controller multipath and jammer channels per pattern."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .geometry import AngleDeg, AngleGrid, UpaShape, nearest_index, steering_vectors
from .patterns import PatternBank

__all__ = [
    "SPEED_OF_LIGHT",
    "PathKind",
    "PathSpec",
    "ScenarioConfig",
    "ChannelSet",
    "dbm_to_watt",
    "wavelength",
    "oneway_gain",
    "twoway_gain",
    "noise_variance",
    "draw_paths",
    "build_channels",
    "draw_scenario",
    "dump_channels",
    "load_channels",
]

# the link budget figures are quoted with c = 3e8
SPEED_OF_LIGHT = 3.0e8


class PathKind(str, Enum):
    LOS = "LoS"
    NLOS = "NLoS"


@dataclass(frozen=True)
class PathSpec:
    kind: PathKind
    rx_angle: AngleDeg
    tx_angle: AngleDeg | None
    alpha: float
    epsilon: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("path gain must be positive")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must lie in [0, 1)")


@dataclass(frozen=True)
class ScenarioConfig:
    d_los_m: float = 200.0
    d_nlos_leg1_m: float = 200.0
    d_nlos_leg2_m: float = 100.0
    s_eff_m2: float = 10.0
    f_c_hz: float = 2.44e9
    angle_range_deg: float = 70.0
    controller_paths: tuple = (PathKind.LOS, PathKind.NLOS)
    jammer_paths: tuple = (PathKind.LOS,)
    p_j_dbm: float = 50.0
    p_c_dbm: float = 27.0
    noise_psd_dbm_hz: float = -174.0
    rx_bandwidth_hz: float = 10e6
    uav_shape: UpaShape = field(default_factory=lambda: UpaShape(2, 2))
    controller_shape: UpaShape = field(default_factory=lambda: UpaShape(2, 1))

    def __post_init__(self):
        for name in ("d_los_m", "d_nlos_leg1_m", "d_nlos_leg2_m", "s_eff_m2", "f_c_hz", "rx_bandwidth_hz"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("p_j_dbm", "p_c_dbm", "noise_psd_dbm_hz"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not 0 <= self.angle_range_deg <= 90:
            raise ValueError("angle_range_deg must lie in [0, 90]")
        object.__setattr__(self, "controller_paths", tuple(PathKind(k) for k in self.controller_paths))
        object.__setattr__(self, "jammer_paths", tuple(PathKind(k) for k in self.jammer_paths))
        if not self.controller_paths:
            raise ValueError("at least one controller path is required")
        if len(self.jammer_paths) != 1:
            raise ValueError("exactly one jammer path is modelled")

    @property
    def p_c(self) -> float:
        return dbm_to_watt(self.p_c_dbm)

    @property
    def p_j(self) -> float:
        return dbm_to_watt(self.p_j_dbm)

    @property
    def sigma_u_sq(self) -> float:
        return noise_variance(self.noise_psd_dbm_hz, self.rx_bandwidth_hz)


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """One realisation.

    H_C_full carries sqrt(P_C) folded into the path gains (unit pilot);
    h_J does not carry P_J, which enters through the jamming symbol variance.
    """

    H_C: np.ndarray  # N_U x N_p
    H_C_full: np.ndarray  # N_U x N_C x N_p
    h_J: np.ndarray  # N_U x N_p
    controller_paths: tuple
    jammer_path: PathSpec
    sigma_u_sq: float
    sigma_j_sq: float
    p_c: float

    @property
    def n_u(self) -> int:
        return self.H_C.shape[0]

    @property
    def n_p(self) -> int:
        return self.H_C.shape[1]

    @property
    def downlink(self) -> np.ndarray:
        """N_C x N_U x N_p: per-pattern transpose of the uplink slices."""
        return np.transpose(self.H_C_full, (1, 0, 2))


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def wavelength(f_c_hz: float) -> float:
    return SPEED_OF_LIGHT / f_c_hz


def oneway_gain(distance_m: float, f_c_hz: float = 2.44e9) -> float:
    if not distance_m > 0 or not f_c_hz > 0:
        raise ValueError("distance and frequency must be positive")
    return wavelength(f_c_hz) / (4.0 * math.pi * distance_m)


def twoway_gain(d1_m: float, d2_m: float, s_eff_m2: float = 10.0, f_c_hz: float = 2.44e9) -> float:
    """Bistatic scattering: sqrt(S*lambda^2) / sqrt((4 pi)^3 d1^2 d2^2)."""
    if not (d1_m > 0 and d2_m > 0 and s_eff_m2 > 0 and f_c_hz > 0):
        raise ValueError("distances, area and frequency must be positive")
    lam = wavelength(f_c_hz)
    return math.sqrt(s_eff_m2 * lam**2) / math.sqrt((4.0 * math.pi) ** 3 * d1_m**2 * d2_m**2)


def noise_variance(psd_dbm_hz: float, bandwidth_hz: float) -> float:
    return dbm_to_watt(psd_dbm_hz + 10.0 * math.log10(bandwidth_hz))


def _draw_angle(rng, span):
    el = rng.uniform(-span, span)
    az = rng.uniform(90.0 - span, 90.0 + span)
    return AngleDeg(el, az)


def _path_gain(kind, cfg):
    if kind is PathKind.LOS:
        return oneway_gain(cfg.d_los_m, cfg.f_c_hz)
    return twoway_gain(cfg.d_nlos_leg1_m, cfg.d_nlos_leg2_m, cfg.s_eff_m2, cfg.f_c_hz)


def draw_paths(cfg: ScenarioConfig, rng: np.random.Generator):
    """Random geometry and phases: (controller paths, jammer path).

    Draw order is fixed (per controller path: rx, tx, epsilon; then the
    jammer) so a seed pins the whole realisation.
    """
    span = cfg.angle_range_deg
    ctrl = []
    for kind in cfg.controller_paths:
        rx = _draw_angle(rng, span)
        tx = _draw_angle(rng, span)
        eps = rng.uniform(0.0, 1.0)
        ctrl.append(PathSpec(kind, rx, tx, _path_gain(kind, cfg), eps))
    kind = cfg.jammer_paths[0]
    rx = _draw_angle(rng, span)
    eps = rng.uniform(0.0, 1.0)
    jam = PathSpec(kind, rx, None, _path_gain(kind, cfg), eps)
    return tuple(ctrl), jam


def build_channels(cfg: ScenarioConfig, controller_paths, jammer_path: PathSpec, C: np.ndarray,
                   grid: AngleGrid = AngleGrid()) -> ChannelSet:
    """Assemble per-pattern channels for fixed path parameters and gain matrix C."""
    C = np.asarray(C)
    n_u, n_c = cfg.uav_shape.total, cfg.controller_shape.total
    sqrt_pc = math.sqrt(cfg.p_c)
    H_full = np.zeros((n_u, n_c, C.shape[0]), dtype=complex)
    for path in controller_paths:
        a_rx = steering_vectors(cfg.uav_shape, *path.rx_angle.as_tuple())
        a_tx = steering_vectors(cfg.controller_shape, *path.tx_angle.as_tuple())
        gains = C[:, nearest_index(*path.rx_angle.as_tuple(), grid)]
        coef = path.alpha * sqrt_pc * np.exp(-2j * np.pi * path.epsilon)
        H_full += coef * np.outer(a_rx, a_tx)[:, :, None] * gains[None, None, :]

    jp = jammer_path
    a_j = steering_vectors(cfg.uav_shape, *jp.rx_angle.as_tuple())
    g_j = C[:, nearest_index(*jp.rx_angle.as_tuple(), grid)]
    h_J = jp.alpha * np.exp(-2j * np.pi * jp.epsilon) * a_j[:, None] * g_j[None, :]

    # the pilot goes out of the controller's first antenna, whose steering
    # entry is 1 for every angle
    H_C = H_full[:, 0, :].copy()
    return ChannelSet(H_C, H_full, h_J, tuple(controller_paths), jp, cfg.sigma_u_sq, cfg.p_j, cfg.p_c)


def draw_scenario(cfg: ScenarioConfig, bank: PatternBank, rng_seed) -> ChannelSet:
    rng = np.random.default_rng(rng_seed)
    ctrl, jam = draw_paths(cfg, rng)
    return build_channels(cfg, ctrl, jam, bank.C, bank.config.grid)


def dump_channels(ch: ChannelSet, path) -> Path:
    """Write a ChannelSet to .npz for regression diagnostics."""
    path = Path(path)

    def pack(paths):
        return np.array([
            [0 if p.kind is PathKind.LOS else 1, p.rx_angle.elevation, p.rx_angle.azimuth,
             np.nan if p.tx_angle is None else p.tx_angle.elevation,
             np.nan if p.tx_angle is None else p.tx_angle.azimuth, p.alpha, p.epsilon]
            for p in paths
        ])

    with path.open("wb") as fh:
        np.savez(fh, H_C=ch.H_C, H_C_full=ch.H_C_full, h_J=ch.h_J,
                 controller_paths=pack(ch.controller_paths), jammer_path=pack([ch.jammer_path]),
                 scalars=np.array([ch.sigma_u_sq, ch.sigma_j_sq, ch.p_c]))
    return path


def load_channels(path) -> ChannelSet:
    def unpack(arr):
        out = []
        for kind, el, az, tel, taz, alpha, eps in arr:
            tx = None if np.isnan(tel) else AngleDeg(tel, taz)
            out.append(PathSpec(PathKind.LOS if kind == 0 else PathKind.NLOS, AngleDeg(el, az), tx, alpha, eps))
        return tuple(out)

    with np.load(path) as z:
        s = z["scalars"]
        return ChannelSet(z["H_C"], z["H_C_full"], z["h_J"], unpack(z["controller_paths"]),
                          unpack(z["jammer_path"])[0], float(s[0]), float(s[1]), float(s[2]))
