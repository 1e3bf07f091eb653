"""Controller and jammer angle-of-arrival estimation.

The controller is found by a greedy sparse recovery over the angle grid
(OMP with multiple measurement vectors, one per receive antenna) using the
pattern gain matrix as the dictionary. The jammer direction follows from the
per-pattern jamming magnitude after the controller's contribution is removed.
A MUSIC estimator is kept as the classical baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .geometry import AngleDeg, AngleGrid, UpaShape, index_to_angles, steering_matrix_grid
from .sensing import ReceivedTensor

__all__ = [
    "OmpConfig",
    "ControllerEstimate",
    "JammerEstimate",
    "MusicInapplicable",
    "average_snapshots",
    "real_left_matmul",
    "omp_mmv",
    "controller_estimate_at",
    "subtract_controller",
    "MEAN_ABS_FACTOR",
    "jammer_magnitude",
    "jammer_ml_angle",
    "music_spectrum",
    "music_baseline",
]


@dataclass(frozen=True)
class OmpConfig:
    eta_th: float = 1e-3
    max_paths: int = 8

    def __post_init__(self):
        if not 0 < self.eta_th < 1:
            raise ValueError("eta_th must lie in (0, 1)")
        if self.max_paths < 1:
            raise ValueError("max_paths must be >= 1")


@dataclass(frozen=True, eq=False)
class ControllerEstimate:
    zeta: tuple
    angles: tuple
    G_N: np.ndarray  # L x N_U
    G: np.ndarray  # L x N_U
    converged: bool = True
    failed: bool = False
    residual_trace: tuple = field(default=())

    @property
    def L_hat(self) -> int:
        return len(self.zeta)

    @property
    def alpha_hat(self) -> np.ndarray:
        if not self.zeta:
            return np.zeros(0)
        return np.abs(self.G).mean(axis=1)

    @property
    def strongest(self) -> int:
        """Row of G with the largest summed magnitude (lowest index on ties)."""
        return int(np.argmax(np.abs(self.G).sum(axis=1)))

    @classmethod
    def empty(cls, n_u: int):
        z = np.zeros((0, n_u), dtype=complex)
        return cls((), (), z, z.copy(), converged=False, failed=True)


@dataclass(frozen=True, eq=False)
class JammerEstimate:
    angle: AngleDeg
    grid_index: int
    Hhat_J_mag: np.ndarray | None = None


class MusicInapplicable(ValueError):
    """Raised when the array is too small for the requested source count."""


def average_snapshots(Y) -> np.ndarray:
    y = Y.samples if isinstance(Y, ReceivedTensor) else np.asarray(Y)
    if y.shape[1] < 1:
        raise ValueError("need at least one snapshot")
    return y.mean(axis=1)


def real_left_matmul(R: np.ndarray, X: np.ndarray) -> np.ndarray:
    """R @ X for real R and complex X without promoting R to complex."""
    if not np.iscomplexobj(X):
        return R @ X
    X = np.asarray(X)
    vec = X.ndim == 1
    X2 = X.reshape(X.shape[0], -1)
    k = X2.shape[1]
    out = R @ np.ascontiguousarray(np.concatenate([X2.real, X2.imag], axis=1))
    res = out[:, :k] + 1j * out[:, k:]
    return res[:, 0] if vec else res


def _gains(C_cols, S_T):
    return np.linalg.pinv(C_cols) @ S_T


def omp_mmv(S_U: np.ndarray, C_L: np.ndarray, C_N: np.ndarray, Abar: np.ndarray,
            cfg: OmpConfig = OmpConfig(), grid: AngleGrid = AngleGrid()) -> ControllerEstimate:
    """Greedy joint-support recovery of the controller paths.

    S_U: N_U x N_p averaged snapshots. C_L: dictionary used for the
    projections and gains. C_N: column-normalised dictionary used for the
    correlations. Abar: N_a x N_U grid steering matrix.
    """
    S_U = np.asarray(S_U)
    n_u = S_U.shape[0]
    S_T = S_U.T  # N_p x N_U
    eta0 = float(np.vdot(S_T, S_T).real)
    if eta0 == 0.0:
        return ControllerEstimate.empty(n_u)

    Abar_c = np.conj(Abar)
    zeta: list[int] = []
    phi = S_T
    trace = [1.0]
    while trace[-1] > cfg.eta_th and len(zeta) < cfg.max_paths:
        gamma_mat = real_left_matmul(C_N.T, phi)  # N_a x N_U
        gamma = np.einsum("an,an->a", gamma_mat, Abar_c)
        score = np.abs(gamma)
        # a selected column is orthogonal to the residual already; mask it so
        # rounding noise can never pick it twice
        score[zeta] = -1.0
        zeta.append(int(np.argmax(score)))
        cols = C_L[:, zeta]
        phi = S_T - cols @ _gains(cols, S_T)
        trace.append(float(np.vdot(phi, phi).real) / eta0)

    converged = trace[-1] <= cfg.eta_th
    G = _gains(C_L[:, zeta], S_T)
    G_N = _gains(C_N[:, zeta], S_T)
    angles = tuple(index_to_angles(i, grid) for i in zeta)
    return ControllerEstimate(tuple(zeta), angles, G_N, G, converged=converged, residual_trace=tuple(trace))


def controller_estimate_at(zeta, S_U: np.ndarray, C_L: np.ndarray, C_N: np.ndarray,
                           grid: AngleGrid = AngleGrid()) -> ControllerEstimate:
    """Least-squares gains for a given support (used by the baselines)."""
    zeta = [int(i) for i in zeta]
    S_T = np.asarray(S_U).T
    if not zeta:
        return ControllerEstimate.empty(S_T.shape[1])
    return ControllerEstimate(tuple(zeta), tuple(index_to_angles(i, grid) for i in zeta),
                              _gains(C_N[:, zeta], S_T), _gains(C_L[:, zeta], S_T))


def subtract_controller(Y: ReceivedTensor, est: ControllerEstimate, C: np.ndarray) -> ReceivedTensor:
    """Remove the reconstructed controller term from every snapshot.

    C is the dictionary the gains G were fitted against (C or C_L), so the
    reconstruction is H_hat[:, n_p] = sum_l G[l, :] * C[n_p, zeta_l].
    """
    if not est.zeta:
        return Y
    H_hat = (C[:, list(est.zeta)] @ est.G).T  # N_U x N_p
    return ReceivedTensor(Y.samples - H_hat[:, None, :], Y.schedule)


# E|y| / s for a zero-mean Gaussian y with E|y|^2 = s^2
MEAN_ABS_FACTOR = {
    "real": np.sqrt(2.0 / np.pi),  # folded normal
    "complex": np.sqrt(np.pi) / 2.0,  # Rayleigh
}


def jammer_magnitude(Yres, sigma_u_sq: float, sigma_j_sq: float, sample_model: str = "complex") -> np.ndarray:
    """|H_J| per antenna and pattern from the mean residual magnitude.

    After the controller is removed each residual sample is zero-mean Gaussian
    with power s^2 = |H_J|^2 sigma_J^2 + sigma_U^2, so S_J = mean|y| estimates
    k*s and |H_J| = sqrt(max((S_J/k)^2 - sigma_U^2, 0) / sigma_J^2).
    k = sqrt(2/pi) for real samples, sqrt(pi)/2 for circular complex ones.
    """
    k = MEAN_ABS_FACTOR[sample_model]
    y = Yres.samples if isinstance(Yres, ReceivedTensor) else np.asarray(Yres)
    s_j = np.abs(y).mean(axis=1)
    rad = np.maximum((s_j / k) ** 2 - sigma_u_sq, 0.0)
    return np.sqrt(rad / sigma_j_sq)


def jammer_ml_angle(Hhat_J_mag: np.ndarray, C_N: np.ndarray, grid: AngleGrid = AngleGrid()) -> JammerEstimate:
    score = real_left_matmul(C_N.T, Hhat_J_mag.sum(axis=0))
    idx = int(np.argmax(score))
    return JammerEstimate(index_to_angles(idx, grid), idx, Hhat_J_mag)


def music_spectrum(Y, n_sources: int, uav_shape: UpaShape, grid: AngleGrid = AngleGrid()) -> np.ndarray:
    """MUSIC pseudo-spectrum on the grid image (n_ele x n_azi)."""
    y = Y.samples if isinstance(Y, ReceivedTensor) else np.asarray(Y)
    n_u = y.shape[0]
    if n_u <= n_sources:
        raise MusicInapplicable(f"MUSIC needs more antennas ({n_u}) than sources ({n_sources})")
    x = y.reshape(n_u, -1)
    R = x @ x.conj().T / x.shape[1]
    _, vecs = np.linalg.eigh(R)  # ascending
    En = vecs[:, : n_u - n_sources]
    A = steering_matrix_grid(uav_shape, grid)  # N_a x N_U
    proj = np.sum(np.abs(A.conj() @ En) ** 2, axis=1)
    spectrum = 1.0 / np.maximum(proj, 1e-300)
    return spectrum.reshape(grid.shape)


def music_baseline(Y, n_sources: int, uav_shape: UpaShape, grid: AngleGrid = AngleGrid()) -> list:
    """Top ``n_sources`` local maxima of the pseudo-spectrum, strongest first."""
    spectrum = music_spectrum(Y, n_sources, uav_shape, grid)
    peaks = np.flatnonzero((ndimage.maximum_filter(spectrum, size=3, mode="nearest") == spectrum).ravel())
    flat = spectrum.ravel()
    # stable sort on -height keeps the lowest index first among equal peaks
    order = peaks[np.argsort(-flat[peaks], kind="stable")]
    if order.size < n_sources:
        rest = np.setdiff1d(np.argsort(-flat, kind="stable"), order, assume_unique=False)
        order = np.concatenate([order, rest[: n_sources - order.size]])
    return [index_to_angles(int(i), grid) for i in order[:n_sources]]
