"""Hop-schedule bookkeeping and the received uplink snapshot tensor."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .channel import ChannelSet

__all__ = ["HopSchedule", "HopSlot", "ReceivedTensor", "hop_carrier", "complex_normal", "simulate_uplink_rx"]


@dataclass(frozen=True)
class HopSchedule:
    """Frequency-hopping timing; only the snapshot dimensioning is simulated.

    ``n_s_override`` pins the per-pattern snapshot count directly (the
    experiments use 1000) instead of deriving it from N_s_bar*N_h/N_p.
    """

    n_p: int
    n_h: int | None = None
    t_h: float = 1e-3
    t_i: float = 12e-3
    b_h: float = 1e6
    b_i: float = 20e6
    b_p: float = 10e6
    t_u: float = 1e-4
    n_s_override: int | None = 1000

    def __post_init__(self):
        for name in ("t_h", "t_i", "b_h", "b_i", "b_p", "t_u"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.n_p < 1:
            raise ValueError("n_p must be >= 1")
        if self.n_h is None:
            object.__setattr__(self, "n_h", self.n_p)
        if self.n_h < 1:
            raise ValueError("n_h must be >= 1")
        if self.n_s_override is None and (self.n_s_bar * self.n_h) % self.n_p:
            raise ValueError("N_s_bar * N_h must be divisible by N_p")
        if self.n_s_override is not None and self.n_s_override < 1:
            raise ValueError("n_s_override must be >= 1")

    @property
    def n_s_bar(self) -> int:
        return int(round(self.t_u * self.b_p))

    @property
    def n_s(self) -> int:
        if self.n_s_override is not None:
            return int(self.n_s_override)
        return self.n_s_bar * self.n_h // self.n_p


class HopSlot(NamedTuple):
    frequency_hz: float
    phase_rad: float
    t_start: float
    t_stop: float


def hop_carrier(n_h: int, schedule: HopSchedule, hop_frequencies, phases) -> HopSlot:
    if not 0 <= n_h < schedule.n_h:
        raise IndexError(f"hop {n_h} outside [0, {schedule.n_h})")
    return HopSlot(float(hop_frequencies[n_h]), float(phases[n_h]),
                   n_h * schedule.t_h, (n_h + 1) * schedule.t_h)


@dataclass(frozen=True, eq=False)
class ReceivedTensor:
    samples: np.ndarray  # N_U x N_s x N_p
    schedule: HopSchedule | None = None

    def __post_init__(self):
        if self.samples.ndim != 3:
            raise ValueError("samples must be N_U x N_s x N_p")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")

    @property
    def shape(self):
        return self.samples.shape


def complex_normal(rng: np.random.Generator, variance: float, size) -> np.ndarray:
    """Circularly-symmetric complex Gaussian with E|z|^2 = variance."""
    z = rng.standard_normal(size=(2, *np.atleast_1d(size)))
    return np.sqrt(variance / 2.0) * (z[0] + 1j * z[1])


def simulate_uplink_rx(ch: ChannelSet, schedule: HopSchedule | int, rng_seed) -> ReceivedTensor:
    """Y = H_C + h_J * x_J + w for every snapshot of every pattern block."""
    n_s = schedule if isinstance(schedule, int) else schedule.n_s
    sched = None if isinstance(schedule, int) else schedule
    rng = np.random.default_rng(rng_seed)
    n_u, n_p = ch.H_C.shape
    x_j = complex_normal(rng, ch.sigma_j_sq, (n_s, n_p))
    w = complex_normal(rng, ch.sigma_u_sq, (n_u, n_s, n_p))
    y = ch.H_C[:, None, :] + ch.h_J[:, None, :] * x_j[None, :, :] + w
    return ReceivedTensor(y, sched)
