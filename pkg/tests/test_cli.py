import io

import numpy as np
import pytest

from rprfas.cli import main
from rprfas.patterns import load_bank


def _run(argv):
    out = io.StringIO()
    return main(argv, out=out), out.getvalue()


def test_bank_roundtrip(tmp_path):
    path = tmp_path / "bank.bin"
    rc, text = _run(["bank", "--hpbw", "65", "--np", "7x7", "--out", str(path)])
    assert rc == 0 and "49 patterns" in text
    bank = load_bank(path)
    assert bank.n_p == 49 and bank.config.element.hpbw_deg == 65


def test_codec_table(tmp_path):
    path = tmp_path / "bank.bin"
    _run(["bank", "--np", "7x7", "--out", str(path)])
    rc, text = _run(["codec", "--bank", str(path), "--threshold", "-30", "--out-dir", str(tmp_path)])
    assert rc == 0
    assert "NMSE" in text and "7x7" in text
    assert (tmp_path / "codec.csv").read_text().count("\n") == 2


def test_run_and_report(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text("n_p_azi = 7\nn_p_ele = 7\ntrials = 2\nn_s = 100\n")
    rc, text = _run(["--config", str(cfg), "--out-dir", str(tmp_path / "o"), "run", "--seed", "5"])
    assert rc == 0 and "se_up" in text
    rc, text2 = _run(["report", str(tmp_path / "o" / "trials.csv")])
    assert rc == 0 and text2.splitlines()[:3] == text.splitlines()[:3]


def test_sweep_emits_one_summary_per_value(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text("n_p_azi = 7\nn_p_ele = 7\ntrials = 1\nn_s = 50\n")
    rc, text = _run(["sweep", "--config", str(cfg), "--param", "p_c_dbm", "--values", "27,29,31,33",
                     "--out-dir", str(tmp_path)])
    assert rc == 0
    assert len([l for l in text.splitlines() if l.startswith("p_c_dbm=")]) == 4
    assert len(list(tmp_path.glob("p_c_dbm_*/summary.csv"))) == 4
    assert (tmp_path / "sweep_p_c_dbm.csv").read_text().count("\n") == 5


@pytest.mark.parametrize("argv", [["bogus"], ["run", "--no-such-flag"], [], ["--threads", "0", "report", "x"]])
def test_bad_usage_nonzero(argv, capsys):
    rc, _ = _run(argv)
    assert rc != 0
    assert "usage" in capsys.readouterr().err


def test_config_error_reported(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text("not_a_key = 1\n")
    rc, _ = _run(["run", "--config", str(cfg)])
    assert rc == 1 and "not_a_key" in capsys.readouterr().err
