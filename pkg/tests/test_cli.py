import csv

import numpy as np
import pytest
import yaml

from podmci import cli
from podmci.errors import SolverError
from podmci.io import load_rom


def write_cfg(tmp_path, **over):
    cfg = {
        "study": "mini", "problem": {"name": "sphere", "settings": {"n_cells": 12, "t_end": 2e-8}},
        "parameters": [{"name": "radius", "lo": 5.9, "hi": 6.1, "units": "cm"}],
        "sampling": {"kind": "tensor", "points_per_dim": 6}, "qoi": "final_power_profile",
        "truncation": {"kind": "energy", "value": 1e-10}, "output": {"dir": str(tmp_path / "out")},
    }
    cfg.update(over)
    p = tmp_path / "cfg.yaml"
    p.write_text(yaml.safe_dump(cfg))
    return p


@pytest.fixture
def trained(tmp_path):
    cfgp = write_cfg(tmp_path)
    assert cli.main(["sweep", "-c", str(cfgp)]) == 0
    assert cli.main(["train", "-c", str(cfgp)]) == 0
    return cfgp, tmp_path / "out"


def test_preset_list(capsys):
    assert cli.main(["preset", "list"]) == 0
    out = capsys.readouterr().out
    for name in cli.PRESETS:
        assert name in out


def test_sweep_train_predict(trained, capsys):
    cfgp, out = trained
    assert (out / "final_power_profile.rom").exists()
    assert (out / "final_power_profile_scree.csv").exists()
    # a second sweep finds everything stored
    capsys.readouterr()
    assert cli.main(["sweep", "-c", str(cfgp)]) == 0
    assert "0 to run" in capsys.readouterr().out
    pts = out / "mu.csv"
    pts.write_text("5.95\n6.05\n")
    dest = out / "pred.csv"
    assert cli.main(["predict", "-m", str(out / "final_power_profile.rom"), "--mu-file", str(pts),
                     "--output", str(dest)]) == 0
    rows = list(csv.reader(open(dest)))
    assert len(rows) == 3 and len(rows[1]) == 1 + 1 + 12
    model = load_rom(out / "final_power_profile.rom")
    np.testing.assert_allclose([float(v) for v in rows[1][2:]], model.predict(np.array([5.95])).values)


def test_predict_extrapolation_warns(trained, capsys):
    _, out = trained
    assert cli.main(["predict", "-m", str(out / "final_power_profile.rom"), "--mu", "6.5"]) == 0
    assert "extrapolation" in capsys.readouterr().err


def test_predict_wrong_dimension(trained):
    _, out = trained
    assert cli.main(["predict", "-m", str(out / "final_power_profile.rom"), "--mu", "6.0,1.0"]) == 2


def test_cv_and_dist(trained):
    cfgp, out = trained
    assert cli.main(["cv", "-c", str(cfgp), "--k", "loo"]) == 0
    assert list(out.glob("*cv*.csv"))
    assert cli.main(["dist", "-c", str(cfgp), "-m", str(out / "final_power_profile.rom"), "--n", "1"]) == 0


def test_invalid_config_exit_2(tmp_path, capsys):
    cfgp = write_cfg(tmp_path, qoi="nonsense")
    assert cli.main(["sweep", "-c", str(cfgp)]) == 2
    assert "qoi" in capsys.readouterr().err


def test_train_before_sweep_exit_4(tmp_path):
    assert cli.main(["train", "-c", str(write_cfg(tmp_path))]) == 4


def test_missing_file_exit_4(tmp_path):
    assert cli.main(["predict", "-m", str(tmp_path / "none.rom"), "--mu", "1"]) == 4


def test_corrupt_model_exit_4(tmp_path):
    p = tmp_path / "bad.rom"
    p.write_bytes(b"garbage")
    assert cli.main(["predict", "-m", str(p), "--mu", "1"]) == 4


def test_solver_failure_exit_3(tmp_path, monkeypatch):
    def boom(args):
        raise SolverError("did not converge")
    monkeypatch.setattr(cli, "_run_point", boom)
    assert cli.main(["sweep", "-c", str(write_cfg(tmp_path))]) == 3


def test_empty_random_sampling_warns(tmp_path, caplog):
    cfgp = write_cfg(tmp_path, sampling={"kind": "random", "n": 0, "seed": 1})
    assert cli.main(["sweep", "-c", str(cfgp)]) == 0
    assert "empty" in caplog.text
