import csv
import json

import pytest

from qsrsopt.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from qsrsopt.reporting import (ConfigError, budget_line, cmd_demo_sparsity, cmd_validate,
                               resolve_config, significant_count)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_default_budget_lines():
    assert budget_line(resolve_config("three_hump"), False) == \
        "sampling points per iteration: 30, basis functions: 90"
    assert budget_line(resolve_config("pressure_vessel"), False) == \
        "sampling points per iteration: 100, basis functions: 300"
    cfg = resolve_config("three_hump")
    assert cfg.ga.islands * cfg.ga.subpopulation_size == 800


def test_config_file_overrides(tmp_path):
    path = write(tmp_path, "run.ini", "[run]\nproblem = sphere\nm = 12\nseeds = 3, 4\n"
                                      "[ga]\nsubpopulation_size = 8\ngenerations = 2\n"
                                      "[oracle]\npoints_per_dimension = 11\n")
    cfg = resolve_config(path=path)
    assert cfg.m == 12 and cfg.seeds == (3, 4) and cfg.ga.subpopulation_size == 8
    assert cfg.scan.points_per_dimension == 11
    assert resolve_config(path=path, seed=9).seeds == (9,)


@pytest.mark.parametrize("text, field", [
    ("[run]\nbogus = 1\n", "run.bogus"),
    ("[ga]\nislands = many\n", "ga.islands"),
    ("[ga]\nmystery = 2\n", "ga.mystery"),
    ("[other]\nx = 1\n", "other"),
    ("[oracle]\npoints_per_dimension = 1\n", "oracle.points_per_dimension"),
])
def test_config_errors_name_the_field(tmp_path, text, field):
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        resolve_config(path=write(tmp_path, "bad.ini", text))


def test_cli_config_error_exit_code(tmp_path, capsys):
    code = main(["optimize", "--config", write(tmp_path, "bad.ini", "[ga]\nislands = 0\n")])
    assert code == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err
    assert main(["optimize", "--problem", "nope"]) == EXIT_CONFIG


def test_cli_optimize_deterministic(tmp_path, capsys):
    path = write(tmp_path, "run.ini", "[run]\nproblem = sphere\nseeds = 1\n"
                                      "[ga]\nislands = 2\nsubpopulation_size = 6\ngenerations = 3\n")
    out = tmp_path / "out"
    assert main(["optimize", "--config", path, "--out", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "deterministic mode" in text
    report = json.loads((out / "report.json").read_text())
    run = report["runs"][0]
    assert run["requested"] == 2 * 6 * 3
    assert run["evaluator_calls"] == run["requested"] - run["cache_hits"]
    rows = list(csv.reader(open(out / "summary.csv")))
    assert rows[0][0] == "seed" and len(rows) == 2
    assert (out / "trace_seed1.csv").exists()


def test_cli_optimize_surrogate_problem(tmp_path, capsys):
    path = write(tmp_path, "run.ini", "[run]\nproblem = cubic\nm = 10\n"
                                      "[ga]\nislands = 2\nsubpopulation_size = 4\ngenerations = 2\n")
    assert main(["optimize", "--config", path]) == EXIT_OK
    text = capsys.readouterr().out
    assert "sampling points per iteration: 10, basis functions: 30" in text


def test_validate_cubic():
    report = cmd_validate(resolve_config("cubic"), [0.0])
    row = report["rows"][0]
    assert row["response"] == "objective"
    assert row["qsrs_upper"] == pytest.approx(3.0, abs=1e-8)
    assert row["qsrs_lower"] == pytest.approx(-3.0, abs=1e-8)
    assert row["scan_max"] == 3.0 and row["scan_min"] == -3.0
    assert row["abs_gap"] == pytest.approx(0.0, abs=1e-8)


def test_cli_validate_writes_files(tmp_path, capsys):
    out = tmp_path / "v"
    assert main(["validate", "--problem", "cubic", "--point", "0", "--out", str(out)]) == EXIT_OK
    assert "objective" in capsys.readouterr().out
    assert (out / "validate.csv").read_text().startswith("response,")


def test_cli_validate_bad_point(capsys):
    assert main(["validate", "--problem", "cubic", "--point", "abc"]) == EXIT_CONFIG
    assert main(["validate", "--problem", "cubic", "--point", "0.5"]) == EXIT_CONFIG
    assert "outside the shrunk bounds" in capsys.readouterr().err


def test_cli_runtime_failure_exit_code(tmp_path, capsys):
    problem = write(tmp_path, "pole.ini", "[problem]\nname = pole\nobjective = x/(x - x)\n"
                                          "[variables]\nx = -1, 1, 0.5\n")
    path = write(tmp_path, "run.ini", f"[run]\nproblem = {problem}\nm = 9\n"
                                      "[ga]\nislands = 1\nsubpopulation_size = 4\ngenerations = 1\n")
    assert main(["optimize", "--config", path]) == EXIT_RUNTIME
    assert "runtime failure" in capsys.readouterr().err


@pytest.mark.parametrize("target, count", [("quadratic", 6), ("cubic", 2), ("t5", 1), ("zero", 0)])
def test_demo_sparsity_counts(target, count):
    assert cmd_demo_sparsity(target)["significant"] == count


def test_cli_demo_sparsity(tmp_path, capsys):
    assert main(["demo-sparsity", "--target", "quadratic", "--out", str(tmp_path)]) == EXIT_OK
    assert "6 significant coefficients" in capsys.readouterr().out
    rows = list(csv.DictReader(open(tmp_path / "sparsity_quadratic.csv")))
    assert len(rows) == 30
    assert main(["demo-sparsity", "--target", "nothing"]) == EXIT_CONFIG


def test_significant_count():
    assert significant_count([0.0, 0.0]) == 0
    assert significant_count([1.0, 1e-7, -0.5]) == 2
