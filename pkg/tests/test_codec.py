import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rprfas.codec import (
    CodecConfig, NMSE_FLOOR_DB, clamp_to_floor, compress, compress_matrix, load_compressed, nmse_and_ratio,
    nmse_db, reconstruct, save_compressed,
)
from rprfas.geometry import AngleGrid
from rprfas.patterns import PatternBankConfig, build_bank

SMALL = AngleGrid(9, 7)


def _oracle_count(C, grid, thr_db, factor):
    """Kept coefficients counted directly from the windowed spectra."""
    W = np.outer(np.hamming(grid.n_ele), np.hamming(grid.n_azi))
    total = 0
    for row in C:
        S = np.fft.fft2(row.reshape(grid.shape) * W)
        m = np.abs(S)
        keep = m > m.max() * 10 ** (thr_db / factor)
        # symmetric partner of (r, c) is (-r mod R, -c mod C)
        R, K = keep.shape
        mirror = np.zeros_like(keep)
        for r, c in zip(*np.nonzero(keep)):
            mirror[(-r) % R, (-c) % K] = True
        total += int((keep | mirror).sum())
    return total


def test_config_validation():
    with pytest.raises(ValueError):
        CodecConfig(threshold_db=0.0)
    with pytest.raises(ValueError):
        CodecConfig(db_factor=3.0)


def test_lossless_roundtrip_small(rng):
    C = rng.random((5, SMALL.total))
    cb = compress_matrix(C, SMALL, CodecConfig(-math.inf))
    np.testing.assert_allclose(reconstruct(cb), C, rtol=0, atol=1e-12)
    assert cb.n_records == C.size


@settings(max_examples=30, deadline=None)
@given(st.floats(-60, -5), st.sampled_from([10.0, 20.0]), st.integers(0, 2**31))
def test_record_count_matches_oracle(thr, factor, seed):
    C = np.random.default_rng(seed).random((3, SMALL.total))
    cb = compress_matrix(C, SMALL, CodecConfig(thr, factor))
    assert cb.n_records == _oracle_count(C, SMALL, thr, factor)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_reconstruction_is_real_and_finite(seed):
    C = np.random.default_rng(seed).random((2, SMALL.total))
    out = reconstruct(compress_matrix(C, SMALL, CodecConfig(-20.0)))
    assert out.dtype == float and np.all(np.isfinite(out))


def test_tighter_threshold_keeps_more(rng):
    C = rng.random((3, SMALL.total))
    counts = [compress_matrix(C, SMALL, CodecConfig(t)).n_records for t in (-10, -30, -60)]
    assert counts == sorted(counts)


def test_nmse_db():
    C = np.ones((2, 2))
    assert nmse_db(C, C) == NMSE_FLOOR_DB
    assert nmse_db(C, 1.1 * C) == pytest.approx(-20.0)
    with pytest.raises(ValueError):
        nmse_db(C, np.ones((2, 3)))


def test_report_fields():
    bank = build_bank(PatternBankConfig(7, 7))
    cb = compress(bank)
    rep = nmse_and_ratio(bank.C, reconstruct(cb), cb)
    assert rep.n_records == cb.n_records
    assert rep.ratio == pytest.approx(cb.n_records / bank.C.size)
    assert rep.byte_ratio == pytest.approx(rep.ratio * 20 / 8)
    assert rep.nmse_db < -20


def test_clamp_to_floor():
    C = np.array([[1.0, -0.2, 0.0005, 0.5]])
    out = clamp_to_floor(C, 30.0)
    np.testing.assert_allclose(out, [[1.0, 1e-3, 1e-3, 0.5]])
    out = clamp_to_floor(C, 20.0, "amplitude")
    np.testing.assert_allclose(out, [[1.0, 0.1, 0.1, 0.5]])


def test_save_load_exact(tmp_path, rng):
    C = rng.random((4, SMALL.total))
    cb = compress_matrix(C, SMALL, CodecConfig(-25.0))
    back = load_compressed(save_compressed(cb, tmp_path / "c.csv"))
    assert back.n_records == cb.n_records and back.config == cb.config
    np.testing.assert_array_equal(reconstruct(back), reconstruct(cb))


def test_load_rejects_bad_index(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("# rprfas-compressed-bank v1\n# dims 7 9\n# n_p 1\n# threshold_db -30.0 db_factor 10.0\n"
                 "pattern,row,col,re,im\n0,7,0,1.0,0.0\n")
    with pytest.raises(ValueError, match="outside"):
        load_compressed(p)


def test_load_rejects_duplicates(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("# rprfas-compressed-bank v1\n# dims 7 9\n# n_p 1\n# threshold_db -30.0 db_factor 10.0\n"
                 "pattern,row,col,re,im\n0,0,0,1.0,0.0\n0,0,0,1.0,0.0\n")
    with pytest.raises(ValueError, match="duplicate"):
        load_compressed(p)


def test_load_rejects_sub_threshold(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("# rprfas-compressed-bank v1\n# dims 7 9\n# n_p 1\n# threshold_db -30.0 db_factor 10.0\n"
                 "pattern,row,col,re,im\n0,0,0,1.0,0.0\n0,1,1,1e-9,0.0\n")
    with pytest.raises(ValueError, match="below"):
        load_compressed(p)
