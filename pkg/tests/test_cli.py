import json

import numpy as np
import pytest

import raftsim.harness as h
from raftsim.harness.cli import main

REDUCED = """
[run]
system = reduced

[geometry]
kind = circle
n = 32

[potential]
kind = logarithmic
theta = 1.0
theta0 = 2.5

[exchange]
kind = reaction

[stepper]
dt = 1e-3

[initial]
kind = random
seed = 7
amplitude = 0.1

[schedule]
t_final = 0.02
sample_stride = 5
checkpoint_stride = 10
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(REDUCED)
    return path


def test_run_reduced(config_file, tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["run-reduced", "--config", str(config_file), "--out", str(out)])
    assert code == 0
    assert (out / "series.csv").exists()
    assert (out / "final.snap").exists()
    assert (out / "checkpoint_00000010.snap").exists()
    assert (out / "resolved_config.ini").exists()


def test_config_error_exit_code(config_file, tmp_path, capsys):
    code = main(["run-reduced", "--config", str(config_file),
                 "--out", str(tmp_path / "o"), "--override", "params.delta=-1"])
    assert code == 2
    assert "delta" in capsys.readouterr().err


def test_missing_config_exit_code(tmp_path, capsys):
    code = main(["run-reduced", "--config", str(tmp_path / "nope.ini")])
    assert code == 2


def test_resume_matches_straight_run(config_file, tmp_path):
    full_out = tmp_path / "full"
    assert main(["run-reduced", "--config", str(config_file),
                 "--out", str(full_out),
                 "--override", "schedule.t_final=0.04"]) == 0
    half_out = tmp_path / "half"
    assert main(["run-reduced", "--config", str(config_file),
                 "--out", str(half_out)]) == 0
    resumed_out = tmp_path / "resumed"
    assert main(["run-reduced", "--config", str(config_file),
                 "--out", str(resumed_out),
                 "--override", "schedule.t_final=0.04",
                 "--resume", str(half_out / "final.snap")]) == 0
    a, _ = h.read_snapshot(full_out / "final.snap")
    b, _ = h.read_snapshot(resumed_out / "final.snap")
    assert a.t == b.t
    assert np.array_equal(a.phi.values, b.phi.values)
    assert np.array_equal(a.v.values, b.v.values)
    assert a.u == b.u


def test_resume_refuses_other_physics(config_file, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run-reduced", "--config", str(config_file),
                 "--out", str(out)]) == 0
    code = main(["run-reduced", "--config", str(config_file),
                 "--out", str(tmp_path / "o2"),
                 "--override", "params.delta=2.0",
                 "--resume", str(out / "final.snap")])
    assert code == 2
    assert "different configuration" in capsys.readouterr().err


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_solver_failure_exit_code(config_file, tmp_path, capsys):
    # an impossible iteration budget forces the fallback chain to bottom out
    out = tmp_path / "out"
    code = main(["run-reduced", "--config", str(config_file),
                 "--out", str(out),
                 "--override", "stepper.newton_max_iters=0",
                 "--override", "stepper.dt_min=1e-3"])
    assert code == 3
    assert (out / "failed.snap").exists()
    assert "solver failure" in capsys.readouterr().err


def test_steady_command(tmp_path):
    cfg = tmp_path / "steady.ini"
    cfg.write_text(REDUCED.replace("amplitude = 0.1", "amplitude = 0.3"))
    out = tmp_path / "out"
    assert main(["steady", "--config", str(cfg), "--out", str(out)]) == 0
    report = json.loads((out / "stationary.json").read_text())
    assert report["residual"] <= 1e-9
    assert (out / "stationary_phi.csv").exists()


def test_sweep_kappa_command(tmp_path):
    cfg = tmp_path / "kappa.ini"
    cfg.write_text(REDUCED + "\n[experiment]\nkappa_list = 1e-2, 1e-3\n")
    out = tmp_path / "out"
    assert main(["sweep-kappa", "--config", str(cfg), "--out", str(out)]) == 0
    report = json.loads((out / "kappa.json").read_text())
    assert [row["kappa"] for row in report["rows"]] == [1e-2, 1e-3]


def test_absorbing_selected_by_config(tmp_path):
    cfg = tmp_path / "abs.ini"
    cfg.write_text(REDUCED
                   + "\n[experiment]\nkind = absorbing\nscales = 1, 3\n"
                   + "t_star = 0.01\n")
    out = tmp_path / "out"
    assert main(["sweep-d", "--config", str(cfg), "--out", str(out)]) == 0
    report = json.loads((out / "absorbing.json").read_text())
    assert report["experiment"] == "absorbing"
    assert len(report["rows"]) == 2
