"""Pattern, combiner and beamformer selection plus spectral-efficiency evaluation.

Uplink: alternate between an exhaustive scan over patterns (combiner fixed)
and a generalized Rayleigh quotient solve for the combiner (pattern fixed).
Downlink: exhaustive pattern scan on the controller-to-jammer gain ratio,
then water-filling over the eigenmodes of the true channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import linalg

from .channel import ChannelSet
from .estimation import ControllerEstimate, JammerEstimate
from .geometry import UpaShape, steering_vectors

__all__ = [
    "DEFAULT_LOAD",
    "UplinkDesign",
    "DownlinkDesign",
    "WaterFill",
    "SEReport",
    "UplinkSE",
    "build_quadratic_forms",
    "pattern_scan_terms",
    "rayleigh_max",
    "uplink_alternating_opt",
    "downlink_pattern_select",
    "water_filling",
    "evaluate_uplink_se",
    "evaluate_downlink_se",
]

DEFAULT_LOAD = 1e-8


@dataclass(frozen=True, eq=False)
class UplinkDesign:
    pattern_index: int
    combiner: np.ndarray
    objective_trace: tuple
    iterations: int

    def __post_init__(self):
        nrm = np.linalg.norm(self.combiner)
        if abs(nrm - 1.0) > 1e-10:
            raise ValueError(f"combiner norm {nrm} != 1")


class WaterFill(NamedTuple):
    powers: np.ndarray
    level: float  # water level mu


@dataclass(frozen=True, eq=False)
class DownlinkDesign:
    pattern_index: int
    powers: np.ndarray
    se: float


class UplinkSE(NamedTuple):
    se: float
    sinr: float


class SEReport(NamedTuple):
    se_up: float
    se_dn: float
    sinr_up: float


def _steer(uav_shape, angles):
    el = [a.elevation for a in angles]
    az = [a.azimuth for a in angles]
    return steering_vectors(uav_shape, el, az)  # L x N_U


def build_quadratic_forms(est: ControllerEstimate, jam: JammerEstimate, C: np.ndarray, n: int,
                          uav_shape: UpaShape):
    """(A, B) of the pattern-n generalized Rayleigh quotient."""
    a_c = _steer(uav_shape, est.angles)
    w = est.alpha_hat**2 * C[n, list(est.zeta)] ** 2
    A = (a_c.T * w) @ a_c.conj()
    a_j = _steer(uav_shape, [jam.angle])[0]
    B = C[n, jam.grid_index] ** 2 * np.outer(a_j, a_j.conj())
    return A, B


def pattern_scan_terms(est, jam, C, b, uav_shape):
    """Numerator and jammer term of the objective for every pattern at combiner b."""
    a_c = _steer(uav_shape, est.angles)
    a_j = _steer(uav_shape, [jam.angle])[0]
    pb_c = np.abs(a_c.conj() @ b) ** 2  # |a_l^H b|^2
    pb_j = abs(np.vdot(a_j, b)) ** 2
    num = (C[:, list(est.zeta)] ** 2) @ (est.alpha_hat**2 * pb_c)
    den = C[:, jam.grid_index] ** 2 * pb_j
    return num, den


def _argmax_ratio(num, den):
    """argmax num/den; zero denominators rank above everything, ordered by numerator."""
    zero = den <= 0
    if np.any(zero & (num > 0)):
        cand = np.where(zero, num, -np.inf)
        return int(np.argmax(cand)), math.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(zero, 0.0, num / np.where(zero, 1.0, den))
    idx = int(np.argmax(ratio))
    return idx, float(ratio[idx])


def rayleigh_max(A: np.ndarray, B: np.ndarray, epsilon: float = DEFAULT_LOAD):
    """Dominant pair of A b = lambda (B + eps I) b via Cholesky whitening.

    Returns (b, lambda) with ||b|| = 1. eps > 0 makes B + eps I positive
    definite for any PSD B, so the factorisation cannot fail.
    """
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    n = A.shape[0]
    B_eps = B + epsilon * np.eye(n)
    B_eps = 0.5 * (B_eps + B_eps.conj().T)
    L = np.linalg.cholesky(B_eps)
    X = linalg.solve_triangular(L, A, lower=True)  # L^-1 A
    At = linalg.solve_triangular(L, X.conj().T, lower=True).conj().T  # L^-1 A L^-H
    At = 0.5 * (At + At.conj().T)
    _, vecs = np.linalg.eigh(At)
    v = vecs[:, -1]
    b = linalg.solve_triangular(L.conj().T, v, lower=False)
    b = b / np.linalg.norm(b)
    # Rayleigh quotient of the returned vector is the most accurate lambda
    lam = float(np.vdot(b, A @ b).real / np.vdot(b, B_eps @ b).real)
    return b, lam


def uplink_alternating_opt(est: ControllerEstimate, jam: JammerEstimate, C: np.ndarray, uav_shape: UpaShape,
                           init_combiner=None, epsilon: float = DEFAULT_LOAD, max_iter: int = 20,
                           rel_tol: float = 1e-8) -> UplinkDesign:
    """Alternate the pattern scan and the combiner update until the objective stalls.

    The objective for pattern n and unit combiner b is
    b^H A_n b / (b^H B_n b + eps), i.e. the loaded quotient that the combiner
    step maximises exactly, so each half-step can only increase it.
    """
    n_u = uav_shape.total
    if init_combiner is None:
        b = np.full(n_u, 1.0 / math.sqrt(n_u), dtype=complex)
    else:
        b = np.asarray(init_combiner, dtype=complex)
        b = b / np.linalg.norm(b)

    def scan(b):
        num, den = pattern_scan_terms(est, jam, C, b, uav_shape)
        return _argmax_ratio(num, den + epsilon)

    n, val = scan(b)
    trace = [val]
    iters = 0
    for _ in range(max_iter):
        iters += 1
        A, B = build_quadratic_forms(est, jam, C, n, uav_shape)
        b_new, _ = rayleigh_max(A, B, epsilon)
        n_new, val_new = scan(b_new)
        if val_new < trace[-1]:
            # the combiner step is a global maximiser; a drop can only be rounding
            trace.append(trace[-1])
            break
        b, n = b_new, n_new
        trace.append(val_new)
        if val_new - trace[-2] <= rel_tol * abs(trace[-2]):
            break
    return UplinkDesign(int(n), b, tuple(trace), iters)


def downlink_pattern_select(est: ControllerEstimate, jam: JammerEstimate, C: np.ndarray) -> int:
    num = (C[:, list(est.zeta)] ** 2) @ (est.alpha_hat**2)
    den = C[:, jam.grid_index] ** 2
    return _argmax_ratio(num, den)[0]


def water_filling(eigenvalues, noise_var: float, power_budget: float) -> WaterFill:
    """p_i = max(mu - noise/lambda_i, 0) with sum p_i = budget.

    Exact: with the floors noise/lambda sorted ascending, the active set is the
    longest prefix whose level (budget + sum of its floors)/k clears its last floor.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    powers = np.zeros_like(lam)
    with np.errstate(divide="ignore", over="ignore"):
        floor_all = np.where(lam > 0, noise_var / np.where(lam > 0, lam, 1.0), np.inf)
    # a floor that overflows can never be reached by a finite budget
    pos = np.flatnonzero(np.isfinite(floor_all))
    if pos.size == 0 or power_budget <= 0:
        return WaterFill(powers, 0.0)
    floor = floor_all[pos]
    order = np.argsort(floor, kind="stable")
    srt = floor[order]
    # prefix k is active iff budget exceeds the water it takes to lift the
    # first k-1 floors to floor k; offsets from the lowest floor keep this
    # exact for k = 1 however large the floors are
    d = srt - srt[0]
    ks = np.arange(1, srt.size + 1)
    with np.errstate(over="ignore", invalid="ignore"):
        gap = ks * d - np.cumsum(d)
    k = int(np.flatnonzero(power_budget > gap)[-1]) + 1
    mu = float(srt[0] + (power_budget + np.cumsum(d)[k - 1]) / k)
    dk = d[:k]
    # budget/k + (mean offset - offset_i) equals mu - floor_i without the
    # cancellation that forming mu first suffers when floors dwarf the budget
    powers[pos[order[:k]]] = power_budget / k + (dk.mean() - dk)
    return WaterFill(powers, mu)


def _raw_full(ch: ChannelSet, n: int):
    # undo the pilot power folded into the path gains
    return ch.H_C_full[:, :, n] / math.sqrt(ch.p_c)


def evaluate_uplink_se(ch: ChannelSet, design: UplinkDesign, p_c: float | None = None) -> UplinkSE:
    """SE of the true channel with combiner b and a matched single-stream beamformer.

    The transmit power P_C is applied once, through the beamformer norm.
    """
    p = ch.p_c if p_c is None else p_c
    n, b = design.pattern_index, design.combiner
    g = b.conj() @ _raw_full(ch, n)  # effective 1 x N_C channel
    signal = p * float(np.vdot(g, g).real)
    interference = ch.sigma_j_sq * abs(np.vdot(b, ch.h_J[:, n])) ** 2
    sinr = signal / (interference + ch.sigma_u_sq)
    return UplinkSE(math.log2(1.0 + sinr), sinr)


def evaluate_downlink_se(ch: ChannelSet, pattern_index: int, power_budget: float | None = None) -> DownlinkDesign:
    p = ch.p_c if power_budget is None else power_budget
    H = _raw_full(ch, pattern_index).T  # N_C x N_U
    eig = np.linalg.svd(H, compute_uv=False) ** 2
    wf = water_filling(eig, ch.sigma_u_sq, p)
    se = float(np.sum(np.log2(1.0 + wf.powers * eig / ch.sigma_u_sq)))
    return DownlinkDesign(int(pattern_index), wf.powers, se)
