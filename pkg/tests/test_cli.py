import json

import numpy as np
import pytest

from spectral_partitions.cli import build_parser, main
from spectral_partitions.grid import BC, GridSpec
from spectral_partitions.optimizer import OptimizerConfig, format_config


@pytest.fixture
def cfg_file(tmp_path):
    g = GridSpec(1.0, 1.0, 12, 12, BC.PERIODIC)
    cfg = OptimizerConfig(g, 2, 10.0, C=1e3, gamma0=1e-2, p_max=3, seed=0)
    p = tmp_path / "run.cfg"
    p.write_text(format_config(cfg))
    return p


def test_subcommands_exist():
    sub = build_parser()._subparsers._group_actions[0].choices
    assert set(sub) == {"eig-error", "optimize", "sweep-alpha", "stability", "calibrate"}


def test_eig_error(tmp_path, capsys):
    out = tmp_path / "t.csv"
    assert main(["eig-error", "--shape", "square", "--n", "20", "--c", "1e3,1e4", "--kmax", "3", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "N,C=1000,C=10000" and len(lines) == 2
    assert capsys.readouterr().out.startswith("N,")


def test_optimize(tmp_path, cfg_file, capsys):
    out = tmp_path / "o"
    assert main(["optimize", "--config", str(cfg_file), "--out", str(out), "--run-id", "a"]) == 0
    for name in ("a.cfg", "a.csv", "a.ppm", "a.pgm", "a_phases.bin"):
        assert (out / name).exists()
    assert "termination=" in capsys.readouterr().out


def test_stability(tmp_path, cfg_file):
    out = tmp_path / "s"
    assert main(["stability", "--config", str(cfg_file), "--out", str(out), "--seeds", "2"]) == 0
    summary = json.loads((out / "stability.json").read_text())
    assert len(summary["totals"]) == 2 and summary["spread"] >= 0
    assert np.loadtxt(out / "agreement.csv", delimiter=",").shape == (2, 2)


def test_sweep_and_calibrate(tmp_path, cfg_file, capsys):
    out = tmp_path / "w"
    assert main(["sweep-alpha", "--config", str(cfg_file), "--out", str(out), "--alphas", "5 20"]) == 0
    assert len((out / "sweep.csv").read_text().splitlines()) == 3
    assert main(["calibrate", "--config", str(cfg_file), "--out", str(out), "--alphas", "20"]) == 0
    assert (out / "calibration.csv").exists()
    assert "best_alpha=" in capsys.readouterr().out


def test_errors_return_2(tmp_path, cfg_file, capsys):
    assert main(["optimize", "--config", str(tmp_path / "missing.cfg"), "--out", str(tmp_path)]) == 2
    assert main(["sweep-alpha", "--config", str(cfg_file), "--out", str(tmp_path), "--alphas", "3 1"]) == 2
    assert "error:" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["eig-error", "--shape", "triangle", "--n", "20", "--c", "1e3", "--out", "x"])
