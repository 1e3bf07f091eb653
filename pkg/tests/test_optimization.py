import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import linalg

from rprfas.channel import ScenarioConfig, build_channels, draw_paths
from rprfas.estimation import ControllerEstimate, JammerEstimate, controller_estimate_at
from rprfas.geometry import AngleGrid, UpaShape, index_to_angles, steering_vectors
from rprfas.optimization import (
    UplinkDesign, _argmax_ratio, build_quadratic_forms, downlink_pattern_select, evaluate_downlink_se,
    evaluate_uplink_se, pattern_scan_terms, rayleigh_max, uplink_alternating_opt, water_filling,
)
from rprfas.patterns import PatternBankConfig, build_bank

BANK = build_bank(PatternBankConfig(7, 7))
SHAPE = UpaShape(2, 2)


def _psd(r, n, rank):
    X = r.standard_normal((n, rank)) + 1j * r.standard_normal((n, rank))
    return X @ X.conj().T


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([1, 2, 4]), st.integers(0, 2**31))
def test_rayleigh_against_scipy(n, seed):
    r = np.random.default_rng(seed)
    A, B = _psd(r, n, r.integers(1, n + 1)), _psd(r, n, r.integers(1, n + 1))
    eps = 1e-3
    b, lam = rayleigh_max(A, B, eps)
    w = linalg.eigh(A, B + eps * np.eye(n), eigvals_only=True)
    assert lam == pytest.approx(w[-1], rel=1e-8)
    assert np.linalg.norm(b) == pytest.approx(1.0)
    res = np.linalg.norm(A @ b - lam * (B + eps * np.eye(n)) @ b)
    assert res <= 1e-6 * max(np.linalg.norm(A), 1e-300)


def test_rayleigh_rank_one_jammer_nulling():
    a = steering_vectors(SHAPE, 0, 60)
    j = steering_vectors(SHAPE, 10, 120)
    b, lam = rayleigh_max(np.outer(a, a.conj()), 100 * np.outer(j, j.conj()), 1e-8)
    assert abs(np.vdot(j, b)) < 1e-3


def test_argmax_ratio():
    assert _argmax_ratio(np.array([1.0, 4.0]), np.array([1.0, 2.0])) == (1, 2.0)
    idx, val = _argmax_ratio(np.array([1.0, 3.0, 2.0]), np.array([1.0, 0.0, 0.0]))
    assert idx == 1 and math.isinf(val)


def test_water_filling_golden():
    wf = water_filling([1.0, 0.5], 0.5, 1.0)
    np.testing.assert_allclose(wf.powers, [0.75, 0.25], atol=1e-12)
    assert wf.level == pytest.approx(1.25)


def test_water_filling_single_active():
    wf = water_filling([1.0, 0.01], 1.0, 1.0)
    np.testing.assert_allclose(wf.powers, [1.0, 0.0], atol=1e-12)


@settings(max_examples=200)
@given(st.lists(st.floats(0, 100), min_size=1, max_size=8), st.floats(1e-3, 10), st.floats(1e-3, 100))
def test_water_filling_kkt(eigs, noise, budget):
    lam = np.array(eigs)
    wf = water_filling(lam, noise, budget)
    p = wf.powers
    assert np.all(p >= 0)
    with np.errstate(divide="ignore", over="ignore"):
        floor_all = noise / lam
    pos = np.isfinite(floor_all)
    if np.any(pos):
        assert p.sum() == pytest.approx(budget, rel=1e-9)
        floor = floor_all[pos]
        # active channels sit exactly on the water level, inactive ones above it
        np.testing.assert_allclose((p[pos] + floor)[p[pos] > 0], wf.level, rtol=1e-9)
        assert np.all(floor[p[pos] == 0] >= wf.level - 1e-9 * wf.level)
    else:
        assert p.sum() == 0


def _estimates(idx_c, idx_j, alphas=(1.0,)):
    angles = tuple(index_to_angles(i) for i in idx_c)
    G = np.array([[a] * SHAPE.total for a in alphas], dtype=complex)
    est = ControllerEstimate(tuple(idx_c), angles, G, G)
    return est, JammerEstimate(index_to_angles(idx_j), idx_j)


def test_quadratic_forms_oracle():
    est, jam = _estimates([90 * 181 + 60, 100 * 181 + 80], 95 * 181 + 120, (2.0, 0.5))
    n = 20
    A, B = build_quadratic_forms(est, jam, BANK.C, n, SHAPE)
    A_ref = sum(al**2 * BANK.C[n, i] ** 2 * np.outer(steering_vectors(SHAPE, *index_to_angles(i).as_tuple()),
                                                      steering_vectors(SHAPE, *index_to_angles(i).as_tuple()).conj())
                for al, i in zip((2.0, 0.5), est.zeta))
    np.testing.assert_allclose(A, A_ref)
    assert np.allclose(A, A.conj().T) and np.allclose(B, B.conj().T)
    b = np.ones(4) / 2
    num, den = pattern_scan_terms(est, jam, BANK.C, b, SHAPE)
    assert num[n] == pytest.approx(np.vdot(b, A @ b).real)
    assert den[n] == pytest.approx(np.vdot(b, B @ b).real)


def test_alternating_trace_monotone():
    for seed in range(20):
        r = np.random.default_rng(seed)
        idx = r.integers(0, 181 * 181, size=3)
        est, jam = _estimates(idx[:2], int(idx[2]), (1.0, 0.3))
        d = uplink_alternating_opt(est, jam, BANK.C, SHAPE)
        assert all(b >= a for a, b in zip(d.objective_trace, d.objective_trace[1:]))
        assert 1 <= d.iterations <= 20


def test_uplink_design_checks_norm():
    with pytest.raises(ValueError):
        UplinkDesign(0, np.ones(4, complex), (), 0)


def _channels(seed=5):
    cfg = ScenarioConfig()
    ctrl, jam = draw_paths(cfg, np.random.default_rng(seed))
    return build_channels(cfg, ctrl, jam, BANK.C), cfg


def test_uplink_se_oracle():
    ch, cfg = _channels()
    b = np.array([1, 1j, -1, 0.5]) / np.linalg.norm([1, 1j, -1, 0.5])
    n = 11
    se = evaluate_uplink_se(ch, UplinkDesign(n, b, (), 0))
    H = ch.H_C_full[:, :, n] / math.sqrt(cfg.p_c)
    sig = cfg.p_c * np.linalg.norm(b.conj() @ H) ** 2
    intf = cfg.p_j * abs(np.vdot(b, ch.h_J[:, n])) ** 2
    sinr = sig / (intf + cfg.sigma_u_sq)
    assert se.sinr == pytest.approx(sinr, rel=1e-12)
    assert se.se == pytest.approx(np.log2(1 + sinr))


def test_downlink_se_single_mode_closed_form():
    cfg = ScenarioConfig(controller_paths=("LoS",))
    ctrl, jam = draw_paths(cfg, np.random.default_rng(1))
    ch = build_channels(cfg, ctrl, jam, BANK.C)
    n = 3
    H = ch.H_C_full[:, :, n] / math.sqrt(cfg.p_c)
    lam = np.linalg.norm(H) ** 2
    d = evaluate_downlink_se(ch, n)
    assert d.se == pytest.approx(np.log2(1 + cfg.p_c * lam / cfg.sigma_u_sq), rel=1e-9)


def test_downlink_pattern_select_prefers_controller():
    c_idx, j_idx = 90 * 181 + 40, 90 * 181 + 140
    est, jam = _estimates([c_idx], j_idx)
    n = downlink_pattern_select(est, jam, BANK.C)
    ratio = BANK.C[:, c_idx] ** 2 / BANK.C[:, j_idx] ** 2
    assert n == int(np.argmax(ratio))
