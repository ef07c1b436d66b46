import json

import pytest
from click.testing import CliRunner

from slroots.cli import main
from slroots.discretize import load_system_matrices
from slroots.harness import registry


@pytest.fixture
def config(tmp_path):
    def write(doc):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(doc))
        return str(path)

    return write


def test_list_problems():
    res = CliRunner().invoke(main, ["list-problems"])
    assert res.exit_code == 0
    assert res.output.split() == list(registry())


def test_run_json(tmp_path, config):
    path = config({"problem": "zaremba_1d", "resolution": 20})
    res = CliRunner().invoke(main, ["run", "--config", path, "--out", str(tmp_path / "o")])
    assert res.exit_code == 0, res.output
    assert (tmp_path / "o" / "report.json").exists()


def test_run_csv(tmp_path, config):
    path = config({"problem": "zaremba_1d", "resolution": 20})
    res = CliRunner().invoke(main, ["run", "--config", path, "--out", str(tmp_path / "o"), "--format", "csv"])
    assert res.exit_code == 0
    assert (tmp_path / "o" / "eigenvalues.csv").exists()


def test_run_to_stdout(config):
    res = CliRunner().invoke(main, ["run", "--config", config({"problem": "neumann_1d", "resolution": 4})])
    assert res.exit_code == 0
    assert json.loads(res.output)["system"]["N"] == 5


def test_output_path_from_config(tmp_path, config):
    out = tmp_path / "cfg_out"
    path = config({"problem": "neumann_1d", "resolution": 4, "output": {"path": str(out), "format": "csv"}})
    assert CliRunner().invoke(main, ["run", "--config", path]).exit_code == 0
    assert (out / "s_numbers.csv").exists()


def test_seed_override(tmp_path, config):
    path = config({"problem": "zaremba_1d", "resolution": 10, "perturbation": {"c": 0.5}, "seed": 1})
    runner = CliRunner()
    runner.invoke(main, ["run", "--config", path, "--out", str(tmp_path / "a")])
    runner.invoke(main, ["run", "--config", path, "--out", str(tmp_path / "b"), "--seed", "2"])
    a = json.loads((tmp_path / "a" / "report.json").read_text())
    b = json.loads((tmp_path / "b" / "report.json").read_text())
    assert a["config"]["seed"] == 1 and b["config"]["seed"] == 2
    assert a["spectral"]["eigenvalues"] != b["spectral"]["eigenvalues"]


def test_unknown_problem_exit_code(config):
    res = CliRunner().invoke(main, ["run", "--config", config({"problem": "nope"})])
    assert res.exit_code == 2
    assert "unknown problem" in res.output


def test_bad_parameter_exit_code(config):
    res = CliRunner().invoke(main, ["run", "--config", config({"problem": "neumann_1d", "params": {"a00": -1}})])
    assert res.exit_code == 2


def test_numerical_failure_exit_code(config):
    # pure Neumann without mass has a singular form
    res = CliRunner().invoke(main, ["run", "--config", config({"problem": "neumann_1d", "params": {"a00": 0}})])
    assert res.exit_code == 3
    assert "discretize" in res.output


def test_missing_config_exit_code(tmp_path):
    res = CliRunner().invoke(main, ["run", "--config", str(tmp_path / "none.json")])
    assert res.exit_code == 2


def test_dump_matrices(tmp_path, config):
    path = config({"problem": "convection_2d", "resolution": 4})
    res = CliRunner().invoke(main, ["dump-matrices", "--config", path, "--out", str(tmp_path / "m")])
    assert res.exit_code == 0
    mats = load_system_matrices(tmp_path / "m")
    assert mats["M"].shape == (25, 25)
