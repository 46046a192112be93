import json

import numpy as np
import pandas as pd
import pytest

from waistPy.cli import main, ExperimentConfig, PRESETS
from waistPy.helpers import WaistError


def _table(path):
    return pd.read_csv(path, comment="#")


def test_sphere_tube_table(tmp_path):
    out = tmp_path / "tube.csv"
    status = main(["tube", "--ambient", "sphere", "--n", "2", "--k", "1", "--tmax", "1.57", "--out", str(out)])
    assert status == 0

    lines = out.read_text().splitlines()
    assert lines[0].startswith("# subcommand:")
    assert any(line.startswith("# config_hash:") for line in lines)
    table = _table(out)
    assert list(table.columns) == ["t", "fraction"]
    assert table["t"].iloc[-1] == pytest.approx(1.57)
    assert table["fraction"].values == pytest.approx(np.sin(table["t"].values), abs=1e-9)


def test_projective_tube_as_json(tmp_path):
    out = tmp_path / "tube.json"
    status = main(["tube", "--ambient", "cp", "--n", "2", "--k", "1", "--points", "5", "--format", "json",
                   "--out", str(out)])
    assert status == 0
    document = json.loads(out.read_text())
    assert document["metadata"]["subcommand"] == "tube"
    t = np.array([row["t"] for row in document["rows"]])
    fraction = np.array([row["fraction"] for row in document["rows"]])
    assert len(t) == 5
    assert fraction == pytest.approx(1 - np.cos(t) ** 4, abs=1e-9)


def test_table_goes_to_stdout(capsys):
    assert main(["tube", "--preset", "tube-sphere", "--points", "3"]) == 0
    captured = capsys.readouterr().out
    assert captured.startswith("# subcommand:")
    assert captured.rstrip().splitlines()[-1].startswith("1.57")


def test_runs_are_reproducible(tmp_path):
    texts = []
    for name in ["first.csv", "second.csv"]:
        out = tmp_path / name
        assert main(["counterexample", "--preset", "delta-sphere", "--samples", "2000", "--out", str(out)]) == 0
        texts.append(out.read_text())
    assert texts[0] == texts[1]
    assert "y" in _table(tmp_path / "first.csv").columns


def test_empty_config_file(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text("")
    assert main(["tube", "--config", str(path)]) == 1


def test_unknown_field_is_rejected_before_running(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"ambient": "sphere", "n": 2, "k": 1, "colour": "red"}))
    out = tmp_path / "never.csv"
    assert main(["tube", "--config", str(path), "--out", str(out)]) == 1
    assert not out.exists()


def test_config_file_values_and_flag_overrides(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"ambient": "sphere", "n": 2, "k": 1, "t_grid": [0.5, 1.0]}))
    out = tmp_path / "tube.csv"
    assert main(["tube", "--config", str(path), "--n", "3", "--out", str(out)]) == 0
    table = _table(out)
    assert table["t"].tolist() == [0.5, 1.0]
    assert table["fraction"].values == pytest.approx(np.sin([0.5, 1.0]) ** 2, abs=1e-9)


def test_argument_errors_exit_with_one(tmp_path):
    assert main(["tube", "--ambient", "torus"]) == 1
    assert main(["tube", "--preset", "ball-wedge"]) == 1
    assert main(["tube", "--ambient", "sphere", "--n", "2"]) == 1
    assert main(["manifold", "--manifold", "cp-line", "--config", str(tmp_path / "missing.json")]) == 1


def test_crofton_check(tmp_path):
    out = tmp_path / "crofton.csv"
    assert main(["manifold", "--manifold", "cp-conic", "--check", "crofton", "--out", str(out)]) == 0
    table = _table(out)
    assert table["degree"].iloc[0] == 2
    assert table["mean_intersections"].iloc[0] == pytest.approx(2.0, rel=0.05)


def test_experiment_config_validation():
    with pytest.raises(WaistError, match="subcommand"):
        ExperimentConfig({"subcommand": "plot"})
    with pytest.raises(WaistError, match="'seed'"):
        ExperimentConfig({"subcommand": "tube", "seed": -1})
    with pytest.raises(WaistError, match="t_grid"):
        ExperimentConfig({"subcommand": "tube", "t_grid": {"start": 0.0}}).tGrid((0.0, 1.0), 4)
    assert ExperimentConfig(dict(PRESETS["tube-cp"])).tGrid((0.0, 1.0), 4).shape == (64,)
