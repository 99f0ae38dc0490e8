import io
import json

import pandas as pd
import pytest

from app import cli
from app.services import exponents as ex
from app.services import simulation_service
from app.services.channel import EnergyConstraintError
from app.services.montecarlo import RESULT_COLUMNS, results_from_csv


def test_exponents_default_table(capsys):
    assert cli.main(["exponents"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    lines = out.strip().splitlines()
    assert lines[0] == ",".join(ex.CURVE_COLUMNS)
    assert len(lines) == 1 + 130
    restored = ex.CurveTable.from_csv(io.StringIO(out))
    assert restored.curve(ex.Scheme.LINEAR)[0].exponent == pytest.approx(0.5)


def test_exponents_weak_only(capsys):
    assert cli.main(["exponents", "--weak", "--points", "5"]) == cli.EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()[1:]
    assert not any(line.startswith("Linear,") for line in lines)
    assert sum(line.startswith("LinearWeakBound,") for line in lines) == 5


def test_exponents_bad_grid(capsys):
    assert cli.main(["exponents", "--alpha-grid", "0.1,0.05"]) == cli.EXIT_USAGE
    assert "参数错误" in capsys.readouterr().err


def test_crossover(capsys):
    assert cli.main(["crossover"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    values = dict(line.split("=", 1) for line in out.splitlines() if "=" in line and " " not in line)
    assert 0.003 < float(values["crossover_alpha"]) < 0.0045
    assert values["reference_alpha"] == "0.0056"
    assert float(values["weak_crossover_alpha"]) < float(values["strong_crossover_alpha"])
    for tag in ("strong", "weak"):
        two_stage = float(values[f"{tag}_two_stage_exponent"])
        assert float(values[f"{tag}_linear_exponent"]) == pytest.approx(two_stage, rel=1e-9)
    assert float(values["crossover_exponent"]) == float(values["strong_two_stage_exponent"])


def test_simulate_is_reproducible(capsys):
    argv = ["simulate", "--scheme", "baseline", "--M", "2", "--nP", "4", "--trials", "2000", "--seed", "7"]
    assert cli.main(argv) == cli.EXIT_OK
    first = capsys.readouterr().out
    assert cli.main(argv) == cli.EXIT_OK
    second = capsys.readouterr().out
    assert first == second
    assert first.splitlines()[0] == ",".join(RESULT_COLUMNS)
    row = results_from_csv(io.StringIO(first))[0]
    assert (row.scheme, row.n, row.trials, row.seed) == ("baseline", 4, 2000, 7)


def test_simulate_seed_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("DEFAULT_SEED", "99")
    assert cli.main(["simulate", "--scheme", "baseline", "--M", "2", "--n", "4", "--trials", "100"]) == cli.EXIT_OK
    assert results_from_csv(io.StringIO(capsys.readouterr().out))[0].seed == 99


def test_config_file_and_flag_precedence(capsys, tmp_path):
    config = tmp_path / "experiment.json"
    config.write_text(json.dumps({"scheme": "baseline", "M": 2, "n": 4, "trials": 500, "seed": 3}), encoding="utf-8")
    assert cli.main(["simulate", "--config", str(config), "--trials", "300"]) == cli.EXIT_OK
    row = results_from_csv(io.StringIO(capsys.readouterr().out))[0]
    assert row.trials == 300
    assert row.seed == 3


def test_simulate_writes_output_and_transcripts(capsys, tmp_path):
    output = tmp_path / "results.csv"
    transcripts = tmp_path / "trials.csv"
    argv = [
        "simulate", "--scheme", "two_stage", "--alpha", "0.1", "--n", "4", "--trials", "200",
        "--output", str(output), "--transcripts", str(transcripts),
    ]
    assert cli.main(argv) == cli.EXIT_OK
    assert capsys.readouterr().out == ""
    assert results_from_csv(output)[0].trials == 200
    df = pd.read_csv(transcripts)
    assert list(df.columns) == ["trial", "w", "wt1", "wt2", "early", "region", "wh1", "wh2", "what", "event"]
    assert len(df) == 200


def test_simulate_fit(capsys):
    argv = ["simulate", "--scheme", "baseline", "--M", "2", "--P", "0.25", "--n-grid", "4,8,12", "--trials", "3000"]
    assert cli.main(argv + ["--fit"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "# fit_slope=" in out
    assert "# analytic_exponent=0.125" in out


@pytest.mark.parametrize(
    "argv",
    [
        ["simulate", "--scheme", "linear", "--n", "10001", "--trials", "10"],
        ["simulate", "--scheme", "baseline", "--trials", "10"],
        ["simulate", "--scheme", "turbo", "--n", "4"],
        ["simulate", "--scheme", "baseline", "--nP", "4", "--P", "3"],
    ],
)
def test_usage_errors(argv, capsys):
    assert cli.main(argv) == cli.EXIT_USAGE


def test_bad_config_file(tmp_path):
    config = tmp_path / "broken.json"
    config.write_text("{not json", encoding="utf-8")
    assert cli.main(["simulate", "--config", str(config)]) == cli.EXIT_USAGE


def test_energy_violation_exit_code(monkeypatch):
    def boom(config):
        raise EnergyConstraintError("超出峰值能量约束")

    monkeypatch.setattr(simulation_service, "simulate_grid", boom)
    assert cli.main(["simulate", "--scheme", "baseline", "--n", "4"]) == cli.EXIT_INVARIANT


def test_verify_analytic_criteria(capsys):
    assert cli.main(["verify", "--only", "1,2,3,11"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 4


def test_verify_detects_broken_formula(capsys, monkeypatch):
    monkeypatch.setattr(ex, "exponent_no_feedback", lambda M, P: 0.3)
    assert cli.main(["verify", "--only", "1"]) == cli.EXIT_VERIFY_FAILED
    assert "[FAIL]" in capsys.readouterr().out
