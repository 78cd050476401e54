import json
import os

import pytest

from jointmpc.cli import main, read_records


@pytest.fixture
def short_ini(tmp_path):
    p = tmp_path / "short.ini"
    p.write_text("[scenario]\nduration = 5\nhover_time = 1\ncrossing_time = 3\nradius = 8\n")
    return str(p)


def test_run_writes_all_outputs(tmp_path, short_ini, capsys):
    out = tmp_path / "run"
    assert main(["run", "--controller", "std", "--config", short_ini, "--seed", "3", "--out", str(out)]) == 0
    names = set(os.listdir(out))
    assert {"links.csv", "kinematics.csv", "aggregate.csv", "aggregate.txt", "manifest.json", "config.ini",
            "trajectories.svg", "min_distance.svg", "capacity.svg"} <= names
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "run" and man["seed"] == 3
    assert len(man["config_hash"]) == 16
    assert man["versions"]["kernel_backend"] in ("python", "cython")
    assert "Std-MPC" in capsys.readouterr().out


def test_montecarlo_restrict_and_plot_roundtrip(tmp_path, short_ini):
    out = tmp_path / "mc"
    args = ["montecarlo", "--config", short_ini, "--seed", "1", "--realizations", "2", "--controller", "pid",
            "--controller", "std", "--no-plots", "--out", str(out)]
    assert main(args) == 0
    assert not (out / "capacity.svg").exists()
    recs = read_records(str(out), 0.1, realization=1)
    assert {r.controller for r in recs} == {"pid", "std"}
    assert recs[0].states.shape == (50, 3, 7)
    plots = tmp_path / "plots"
    assert main(["plot", "--input", str(out), "--out", str(plots), "--realization", "1"]) == 0
    assert (plots / "trajectories.svg").exists()


def test_theory_command(tmp_path):
    out = tmp_path / "th"
    assert main(["theory", "--samples", "500", "--out", str(out)]) == 0
    text = (out / "theory.txt").read_text()
    assert "contraction ratio" in text and "ratio" in text
    assert (out / "theory.csv").read_text().startswith("check,epsilon_m,value\n")


def test_sweep_command(tmp_path, short_ini):
    out = tmp_path / "sw"
    assert main(["sweep-epsilon", "--config", short_ini, "--realizations", "1", "--epsilons-cm", "5",
                 "--out", str(out)]) == 0
    lines = (out / "sweep_epsilon.csv").read_text().splitlines()
    assert lines[0].startswith("epsilon_m,success_rate") and lines[1].startswith("0.05,")


def test_bad_config_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.ini"
    p.write_text("[dynamics]\nts = -1\n")
    assert main(["run", "--config", str(p), "--out", str(tmp_path / "x")]) == 2
    assert "dynamics.ts" in capsys.readouterr().err


def test_plot_without_data(tmp_path):
    assert main(["plot", "--input", str(tmp_path), "--out", str(tmp_path / "p")]) == 1


def test_unknown_controller_rejected():
    with pytest.raises(SystemExit):
        main(["run", "--controller", "magic"])
