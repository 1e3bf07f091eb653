import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from rprfas.geometry import AngleDeg, AngleGrid, grid_angles
from rprfas.patterns import (
    ElementPatternParams, PatternBank, PatternBankConfig, axis_angles, build_bank, build_omni_bank,
    element_attenuation_db, element_gain, load_bank, normalize_columns, rotate_grid, rotate_to_boresight,
    save_bank, solid_angle_weights,
)

P65 = ElementPatternParams()


def _unit(el, az):
    el, az = np.radians(el), np.radians(az)
    return np.array([np.cos(el) * np.sin(az), np.cos(el) * np.cos(az), np.sin(el)])


def test_attenuation_half_power_point():
    # 12*(x/hpbw)^2 = 3 dB at x = hpbw/2
    assert element_attenuation_db(0, 32.5, P65) == pytest.approx(-3.0)
    assert element_attenuation_db(32.5, 0, P65) == pytest.approx(-3.0)


def test_attenuation_clamps():
    assert element_attenuation_db(0, 180, P65) == pytest.approx(-30.0)
    assert element_attenuation_db(90, 90, P65) == pytest.approx(-30.0)


def test_gain_laws():
    amp = ElementPatternParams(gain_law="amplitude")
    assert element_gain(0, 90, P65) == pytest.approx(1.0)
    assert element_gain(0, 90 + 32.5, P65) == pytest.approx(10 ** -0.3)
    assert element_gain(0, 90 + 32.5, amp) == pytest.approx(10 ** -0.15)


def test_gain_azimuth_wraps():
    # 90 + 200 and 90 - 160 are the same direction
    assert element_gain(0, 290, P65) == pytest.approx(element_gain(0, -70, P65))


def test_element_params_validation():
    with pytest.raises(ValueError):
        ElementPatternParams(hpbw_deg=0)
    with pytest.raises(ValueError):
        ElementPatternParams(gain_law="cubic")


def test_axis_angles_7x7():
    cfg = PatternBankConfig(7, 7)
    assert axis_angles(0, cfg).as_tuple() == (-90, 0)
    assert axis_angles(24, cfg).as_tuple() == (0, 90)
    assert axis_angles(48, cfg).as_tuple() == (90, 180)
    with pytest.raises(IndexError):
        axis_angles(49, cfg)


def test_axis_angles_clip_at_edge():
    # 180/8 = 22.5 rounds up to 23; the last axis would overshoot to 184
    cfg = PatternBankConfig(9, 9)
    assert axis_angles(8, cfg).azimuth == 180
    assert axis_angles(7, cfg).azimuth == 161


def test_bank_config_validation():
    with pytest.raises(ValueError):
        PatternBankConfig(1, 7)


def test_rotation_golden():
    assert rotate_to_boresight(AngleDeg(0, 90), AngleDeg(0, 0)) == pytest.approx((0, 180))
    assert rotate_to_boresight(AngleDeg(0, 90), AngleDeg(0, 90)) == pytest.approx((0, 90))


@settings(max_examples=200)
@given(st.floats(-90, 90), st.floats(0, 180), st.floats(-90, 90), st.floats(0, 180))
def test_rotation_against_matrix_oracle(el, az, ael, aaz):
    """The frame maps the axis onto (0, 90) and is a proper rotation."""
    # z-then-intrinsic-y rotation built independently with scipy
    R = Rotation.from_euler("ZY", [-(aaz - 90.0), -ael], degrees=True)
    expected = R.inv().apply(_unit(el, az))
    r_el, r_az = rotate_grid(el, az, AngleDeg(ael, aaz))
    got = _unit(float(r_el), float(r_az))
    # arcsin near the poles costs about sqrt(machine eps) in the angle
    np.testing.assert_allclose(got, expected, atol=1e-7)
    b_el, b_az = rotate_grid(ael, aaz, AngleDeg(ael, aaz))
    np.testing.assert_allclose(_unit(float(b_el), float(b_az)), [1, 0, 0], atol=1e-7)


def test_rotation_azimuth_range():
    el, az = grid_angles()
    _, r_az = rotate_grid(el, az, AngleDeg(35, 47))
    assert np.all(r_az > -180) and np.all(r_az <= 180)


def test_bank_power_normalisation():
    bank = build_bank(PatternBankConfig(7, 7))
    w = solid_angle_weights()
    np.testing.assert_allclose((bank.C**2 * w).sum(axis=1), 1.0, rtol=1e-12)
    assert bank.C.shape == (49, 181 * 181)
    assert np.all(bank.C > 0)


def test_bank_peak_at_axis():
    bank = build_bank(PatternBankConfig(7, 7))
    from rprfas.geometry import angles_to_index
    for n in (10, 24, 30):
        assert np.argmax(bank.C[n]) == angles_to_index(bank.axes[n])


def test_column_normalisation():
    bank = build_bank(PatternBankConfig(7, 7))
    np.testing.assert_allclose(np.linalg.norm(bank.C_N, axis=0), 1.0)
    C = np.zeros((3, 4))
    C[:, 1] = [3, 4, 0]
    out = normalize_columns(C)
    np.testing.assert_array_equal(out[:, 0], 0)
    np.testing.assert_allclose(out[:, 1], [0.6, 0.8, 0])


def test_bank_is_immutable():
    bank = build_bank(PatternBankConfig(7, 7))
    with pytest.raises(ValueError):
        bank.C[0, 0] = 0.0


def test_omni_bank_constant():
    bank = build_omni_bank(PatternBankConfig(7, 7))
    assert np.ptp(bank.C) == 0
    w = solid_angle_weights()
    np.testing.assert_allclose((bank.C**2 * w).sum(axis=1), 1.0)


def test_from_matrix_validation():
    cfg = PatternBankConfig(2, 2, grid=AngleGrid(3, 3))
    with pytest.raises(ValueError):
        PatternBank.from_matrix(np.ones((3, 9)), cfg)
    with pytest.raises(ValueError):
        PatternBank.from_matrix(-np.ones((4, 9)), cfg)


def test_save_load_roundtrip(tmp_path):
    bank = build_bank(PatternBankConfig(7, 7, ElementPatternParams(hpbw_deg=25)))
    path = save_bank(bank, tmp_path / "bank.bin")
    back = load_bank(path)
    np.testing.assert_array_equal(back.C, bank.C)
    assert back.config == bank.config


def test_load_rejects_garbage(tmp_path):
    p = tmp_path / "x.bin"
    p.write_bytes(b"nonsense")
    with pytest.raises(ValueError):
        load_bank(p)
