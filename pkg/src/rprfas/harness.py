"""Monte Carlo driver: one trial runs bank -> channel -> signal -> estimation -> design -> SE."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .channel import build_channels, dbm_to_watt, draw_paths
from .codec import clamp_to_floor, compress, reconstruct
from .config import Estimator, RunConfig
from .estimation import (
    ControllerEstimate,
    JammerEstimate,
    MusicInapplicable,
    average_snapshots,
    controller_estimate_at,
    jammer_magnitude,
    jammer_ml_angle,
    music_baseline,
    omp_mmv,
    subtract_controller,
)
from .geometry import AngleGrid, index_to_angles, nearest_index, round_half_up, steering_matrix_grid, steering_vectors
from .optimization import (
    UplinkDesign,
    downlink_pattern_select,
    evaluate_downlink_se,
    evaluate_uplink_se,
    uplink_alternating_opt,
)
from .patterns import build_bank, build_omni_bank, normalize_columns
from .sensing import simulate_uplink_rx

__all__ = [
    "CSV_VERSION",
    "BASE_COLUMNS",
    "TrialRecord",
    "MetricSummary",
    "SummaryReport",
    "estimation_matrices",
    "run_trial",
    "run_montecarlo",
    "write_csv",
    "records_to_csv",
    "read_csv",
    "summarize",
    "summarize_rows",
    "summary_from_csv",
    "SUMMARY_METRICS",
]

CSV_VERSION = "# rprfas trial records v1"
BASE_COLUMNS = (
    "seed", "true_el_C", "true_az_C", "est_el_C", "est_az_C", "true_el_J", "true_az_J",
    "est_el_J", "est_az_J", "xi_C_deg", "xi_J_deg", "se_up", "se_dn", "pattern_up",
    "pattern_dn", "iters", "flags",
)
# metric -> CDF knot spacing
SUMMARY_METRICS = {"xi_J_deg": 1.0, "xi_C_deg": 1.0, "se_up": 1.0, "se_dn": 1.0, "iters": 1.0}

NAN = float("nan")


@dataclass(frozen=True, eq=False)
class TrialRecord:
    seed: int
    true_C: tuple  # (el, az) per controller path, draw order
    est_C: tuple  # (el, az) of the strongest estimated path, or NaNs
    true_J: tuple
    est_J: tuple
    xi_C_deg: float
    xi_J_deg: float
    se_up: float
    se_dn: float
    pattern_up: int
    pattern_dn: int
    iters: int
    flags: tuple = ()
    est_paths: tuple = ()  # every estimated controller path, selection order
    strongest_true: int = 0
    objective_trace: tuple = field(default=(), repr=False)

    def row(self) -> dict:
        tl = self.true_C[self.strongest_true]
        out = {
            "seed": self.seed,
            "true_el_C": tl[0], "true_az_C": tl[1],
            "est_el_C": self.est_C[0], "est_az_C": self.est_C[1],
            "true_el_J": self.true_J[0], "true_az_J": self.true_J[1],
            "est_el_J": self.est_J[0], "est_az_J": self.est_J[1],
            "xi_C_deg": self.xi_C_deg, "xi_J_deg": self.xi_J_deg,
            "se_up": self.se_up, "se_dn": self.se_dn,
            "pattern_up": self.pattern_up, "pattern_dn": self.pattern_dn,
            "iters": self.iters, "flags": "|".join(self.flags),
        }
        for l, (el, az) in enumerate(self.true_C):
            out[f"true_el_C{l}"] = el
            out[f"true_az_C{l}"] = az
        out["est_paths_C"] = ";".join(f"{el!r}:{az!r}" for el, az in self.est_paths)
        return out


# --- per-configuration state --------------------------------------------------


@lru_cache(maxsize=16)
def estimation_matrices(bank_cfg, codec_cfg, use_compressed: bool, clamp_floor: bool = True):
    """(C used by the UAV, its column-normalised form). C_L when compressed."""
    bank = build_bank(bank_cfg)
    if not use_compressed:
        return bank.C, bank.C_N
    C_L = reconstruct(compress(bank, codec_cfg))
    if clamp_floor:
        C_L = clamp_to_floor(C_L, bank_cfg.element.a_max_db, bank_cfg.element.gain_law)
    C_L.setflags(write=False)
    C_N = normalize_columns(C_L)
    C_N.setflags(write=False)
    return C_L, C_N


@lru_cache(maxsize=4)
def _omni_matrix(bank_cfg):
    return build_omni_bank(bank_cfg).C


# --- metrics ---------------------------------------------------------------


def _angle_error(true, est):
    """max(|[[el]] - el_hat|, |[[az]] - az_hat|) against the rounded truth."""
    return float(max(abs(round_half_up(true[0]) - est[0]), abs(round_half_up(true[1]) - est[1])))


def _worst_error(true, grid: AngleGrid):
    """Largest error any grid estimate could make; recorded when there is no estimate."""
    el, az = float(round_half_up(true[0])), float(round_half_up(true[1]))
    return float(max(el + 90.0, (grid.n_ele - 91) - el, az, (grid.n_azi - 1) - az))


# --- one trial -------------------------------------------------------------


def _music_estimates(Y, S, n_ctrl, cfg, C_est, C_N, grid):
    shape = cfg.scenario.uav_shape
    peaks = music_baseline(Y, n_ctrl + 1, shape, grid)
    # the jammer dominates the covariance, so it is the peak best aligned
    # with the principal eigenvector
    x = Y.samples.reshape(Y.samples.shape[0], -1)
    R = x @ x.conj().T / x.shape[1]
    u1 = np.linalg.eigh(R)[1][:, -1]
    align = [abs(np.vdot(steering_vectors(shape, p.elevation, p.azimuth), u1)) for p in peaks]
    j = int(np.argmax(align))
    jam_angle = peaks[j]
    zeta = [nearest_index(p.elevation, p.azimuth, grid) for k, p in enumerate(peaks) if k != j]
    est = controller_estimate_at(zeta, S, C_est, C_N, grid)
    ji = nearest_index(jam_angle.elevation, jam_angle.azimuth, grid)
    return est, JammerEstimate(jam_angle, ji)


def run_trial(cfg: RunConfig, seed: int) -> TrialRecord:
    """Run one end-to-end trial; deterministic in (cfg, seed)."""
    scn = cfg.scenario
    grid = cfg.bank.grid
    ch_seq, sig_seq = np.random.SeedSequence(int(seed)).spawn(2)
    ctrl_paths, jam_path = draw_paths(scn, np.random.default_rng(ch_seq))

    omni = cfg.estimator is Estimator.OMNI
    C_true = _omni_matrix(cfg.bank) if omni else build_bank(cfg.bank).C
    ch = build_channels(scn, ctrl_paths, jam_path, C_true, grid)
    C_est, C_N = estimation_matrices(cfg.bank, cfg.codec, cfg.use_compressed, cfg.clamp_floor)

    flags = []
    est = jam = None
    if cfg.estimator is Estimator.ORACLE:
        zeta = [nearest_index(*p.rx_angle.as_tuple(), grid) for p in ctrl_paths]
        G = np.array([
            p.alpha * math.sqrt(ch.p_c) * np.exp(-2j * np.pi * p.epsilon)
            * steering_vectors(scn.uav_shape, *p.rx_angle.as_tuple())
            for p in ctrl_paths
        ])
        est = ControllerEstimate(tuple(zeta), tuple(index_to_angles(i, grid) for i in zeta), G, G)
        j = nearest_index(*jam_path.rx_angle.as_tuple(), grid)
        jam = JammerEstimate(index_to_angles(j, grid), j)
    elif not omni:
        Y = simulate_uplink_rx(ch, cfg.n_s, sig_seq)
        S = average_snapshots(Y)
        if cfg.estimator is Estimator.OMP_MMV:
            est = omp_mmv(S, C_est, C_N, steering_matrix_grid(scn.uav_shape, grid), cfg.omp, grid)
            if est.failed:
                flags.append("omp_empty")
            else:
                if not est.converged:
                    flags.append("omp_max_paths")
                Yr = subtract_controller(Y, est, C_est)
                jam = jammer_ml_angle(jammer_magnitude(Yr, ch.sigma_u_sq, ch.sigma_j_sq), C_N, grid)
        else:
            try:
                est, jam = _music_estimates(Y, S, len(ctrl_paths), cfg, C_est, C_N, grid)
            except MusicInapplicable:
                flags.append("music_inapplicable")

    true_C = tuple(p.rx_angle.as_tuple() for p in ctrl_paths)
    true_J = jam_path.rx_angle.as_tuple()
    alphas = [p.alpha for p in ctrl_paths]
    l_bar = int(np.argmax(alphas))

    if omni:
        xi_c = xi_j = NAN
        est_C = est_J = (NAN, NAN)
        est_paths = ()
    else:
        if est is not None and est.L_hat:
            est_C = est.angles[est.strongest].as_tuple()
            xi_c = _angle_error(true_C[l_bar], est_C)
            est_paths = tuple(a.as_tuple() for a in est.angles)
        else:
            est_C, est_paths = (NAN, NAN), ()
            xi_c = _worst_error(true_C[l_bar], grid)
        if jam is not None:
            est_J = jam.angle.as_tuple()
            xi_j = _angle_error(true_J, est_J)
        else:
            est_J = (NAN, NAN)
            xi_j = _worst_error(true_J, grid)

    n_u = scn.uav_shape.total
    if est is not None and est.L_hat and jam is not None:
        up = uplink_alternating_opt(est, jam, C_est, scn.uav_shape, epsilon=cfg.load_eps)
        n_dn = downlink_pattern_select(est, jam, C_est)
        if any(b < a for a, b in zip(up.objective_trace, up.objective_trace[1:])):
            flags.append("trace_decrease")
    else:
        # no usable estimate (or omni): fixed pattern, uniform combiner
        up = UplinkDesign(0, np.full(n_u, 1.0 / math.sqrt(n_u), dtype=complex), (), 0)
        n_dn = 0
        if not omni:
            flags.append("fallback_design")

    se_up = evaluate_uplink_se(ch, up).se
    dl_budget = ch.p_c if cfg.dl_power_dbm is None else dbm_to_watt(cfg.dl_power_dbm)
    se_dn = evaluate_downlink_se(ch, n_dn, dl_budget).se

    return TrialRecord(
        seed=int(seed), true_C=true_C, est_C=est_C, true_J=true_J, est_J=est_J,
        xi_C_deg=xi_c, xi_J_deg=xi_j, se_up=se_up, se_dn=se_dn,
        pattern_up=up.pattern_index, pattern_dn=int(n_dn), iters=up.iterations,
        flags=tuple(flags), est_paths=est_paths, strongest_true=l_bar,
        objective_trace=up.objective_trace,
    )


# --- aggregation -----------------------------------------------------------


@dataclass(frozen=True)
class MetricSummary:
    name: str
    count: int  # finite samples
    mean: float
    variance: float
    cdf: tuple  # ((x, F(x)), ...) at fixed spacing, F non-decreasing to 1


@dataclass(frozen=True)
class SummaryReport:
    n_trials: int
    n_flagged: int
    metrics: dict

    def __getitem__(self, name) -> MetricSummary:
        return self.metrics[name]

    def to_text(self) -> str:
        lines = [f"trials: {self.n_trials}  flagged: {self.n_flagged}",
                 f"{'metric':<10} {'n':>5} {'mean':>12} {'variance':>12}"]
        for m in self.metrics.values():
            lines.append(f"{m.name:<10} {m.count:>5} {m.mean:>12.4f} {m.variance:>12.4f}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "count", "mean", "variance"])
        for m in self.metrics.values():
            w.writerow([m.name, m.count, repr(m.mean), repr(m.variance)])
        w.writerow([])
        w.writerow(["metric", "x", "cdf"])
        for m in self.metrics.values():
            for x, f in m.cdf:
                w.writerow([m.name, repr(x), repr(f)])
        return buf.getvalue()


def _cdf_knots(values: np.ndarray, step: float):
    if values.size == 0:
        return ()
    lo = math.floor(values.min() / step) * step
    hi = math.ceil(values.max() / step) * step
    xs = lo + step * np.arange(int(round((hi - lo) / step)) + 1)
    srt = np.sort(values)
    fs = np.searchsorted(srt, xs, side="right") / values.size
    return tuple((float(x), float(f)) for x, f in zip(xs, fs))


def summarize_rows(columns: dict, n_trials: int, n_flagged: int) -> SummaryReport:
    """Summary from raw metric columns (so it can be rebuilt from a CSV)."""
    metrics = {}
    for name, step in SUMMARY_METRICS.items():
        vals = np.asarray(columns[name], dtype=float)
        vals = vals[np.isfinite(vals)]
        if vals.size:
            mean, var = float(vals.mean()), float(vals.var())
        else:
            mean = var = NAN
        metrics[name] = MetricSummary(name, int(vals.size), mean, var, _cdf_knots(vals, step))
    return SummaryReport(n_trials, n_flagged, metrics)


def summarize(records) -> SummaryReport:
    cols = {name: [getattr(r, name) for r in records] for name in SUMMARY_METRICS}
    return summarize_rows(cols, len(records), sum(1 for r in records if r.flags))


# --- CSV -------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records) -> str:
    buf = io.StringIO()
    buf.write(CSV_VERSION + "\n")
    if records:
        header = list(records[0].row().keys())
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in records:
            row = r.row()
            w.writerow([_fmt(row.get(k, "")) for k in header])
    return buf.getvalue()


def write_csv(records, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(records_to_csv(records))
    except OSError as exc:
        raise OSError(f"cannot write trial CSV {path}: {exc.strerror}") from exc
    return path


def read_csv(path):
    """Rows of a trial CSV as dicts with numeric fields converted."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read trial CSV {path}: {exc.strerror}") from exc
    lines = text.splitlines()
    if not lines or lines[0] != CSV_VERSION:
        raise ValueError(f"{path}: missing or unsupported version line")
    rows = []
    for raw in csv.DictReader(lines[1:]):
        row = {}
        for k, v in raw.items():
            if k in ("flags", "est_paths_C"):
                row[k] = v
            elif k in ("seed", "pattern_up", "pattern_dn", "iters"):
                row[k] = int(v)
            else:
                row[k] = float(v)
        rows.append(row)
    return rows


def summary_from_csv(paths) -> SummaryReport:
    rows = [r for p in paths for r in read_csv(p)]
    cols = {name: [r[name] for r in rows] for name in SUMMARY_METRICS}
    return summarize_rows(cols, len(rows), sum(1 for r in rows if r["flags"]))


# --- driver ----------------------------------------------------------------


def run_montecarlo(cfg: RunConfig, threads: int = 1, out_dir=None):
    """Run cfg.trials trials with seeds base_seed + i.

    Results come back in seed order whatever the thread count. When out_dir
    is given, trials.csv, summary.csv and summary.txt are written there.
    """
    seeds = [cfg.base_seed + i for i in range(cfg.trials)]
    # warm the caches once so worker threads never build the same bank twice
    estimation_matrices(cfg.bank, cfg.codec, cfg.use_compressed, cfg.clamp_floor)
    if threads <= 1:
        records = [run_trial(cfg, s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(lambda s: run_trial(cfg, s), seeds))
    report = summarize(records)
    if out_dir is not None:
        out = Path(out_dir)
        write_csv(records, out / "trials.csv")
        try:
            (out / "summary.csv").write_text(report.to_csv())
            (out / "summary.txt").write_text(report.to_text())
        except OSError as exc:
            raise OSError(f"cannot write summary in {out}: {exc.strerror}") from exc
    return report, records
