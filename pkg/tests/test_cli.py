import json
import pytest
from app.main import build_parser, main


def test_solve_prints_the_balanced_schedule(bench_config_path, capsys):
    assert main(["solve", "--config", str(bench_config_path)]) == 0
    out = capsys.readouterr().out
    assert "0.138888889" in out
    assert "binding module 3" in out


def test_solve_with_explicit_load_and_solver(bench_config_path, capsys):
    assert main(["solve", "--config", str(bench_config_path), "--load", "40", "--solver", "analytic"]) == 0
    out = capsys.readouterr().out
    assert f"{5 / 126:.9f}" in out
    assert "(analytic)" in out


def test_simulate_writes_telemetry_and_summary(bench_config_path, tmp_path, capsys):
    out_path = tmp_path / "run.csv"
    code = main([
        "simulate", "--config", str(bench_config_path), "--out", str(out_path), "--duration", "20",
    ])
    assert code == 0
    assert len(out_path.read_text().splitlines()) == 201
    summary = json.loads((tmp_path / "run.summary.json").read_text())
    assert summary["records"] == 200
    assert "Experiment paper_sec5" in capsys.readouterr().out


def test_check_passes(capsys):
    assert main(["check", "--instances", "25", "--seed", "3", "--workers", "2"]) == 0
    assert "Checked 25 random instances (seed 3)" in capsys.readouterr().out


def test_bad_config_reports_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": 2}))
    assert main(["solve", "--config", str(bad)]) == 1
    assert "error: unsupported schema_version" in capsys.readouterr().err


def test_missing_subcommand_exits_with_usage():
    with pytest.raises(SystemExit) as excinfo:
        main([])
    assert excinfo.value.code == 2


def test_parser_defaults():
    args = build_parser().parse_args(["check"])
    assert args.instances == 1000
    assert args.seed is None
