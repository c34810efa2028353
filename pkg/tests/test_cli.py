import json
import subprocess
import sys

import pytest

from orules.cli import build_parser, main
from orules.scenario import fixture_text


def test_run_writes_stats(tmp_path, capsys):
    out = tmp_path / "s.txt"
    code = main(["run", "cat_v1.scn", "--runs", "300", "--seed", "7", "--stats-out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["n_runs"] == 300
    assert sum(doc["outcomes"].values()) == 300
    assert json.loads(capsys.readouterr().out) == doc


def test_run_from_file(tmp_path):
    scn = tmp_path / "mine.scn"
    scn.write_text(fixture_text("cat_v2"))
    trace = tmp_path / "t.csv"
    assert main(["run", str(scn), "--runs", "3", "--trace-out", str(trace)]) == 0
    text = trace.read_text()
    assert text.count("# seed=") == 3


def test_missing_file_exit_2(capsys):
    assert main(["run", "no/such/file.scn"]) == 2
    assert "no such scenario" in capsys.readouterr().err


def test_zero_runs_exit_2(capsys):
    assert main(["run", "cat_v1", "--runs", "0"]) == 2
    assert "usage" in capsys.readouterr().err


def test_unknown_flag_rejected():
    assert main(["run", "cat_v1", "--frobnicate"]) == 2


def test_bad_scenario_exit_2(tmp_path, capsys):
    scn = tmp_path / "bad.scn"
    scn.write_text("name = x\nversion = CatV1\n[params]\nhalf_life = oops\ntransit_time = 0.3\n")
    assert main(["check", str(scn)]) == 2
    err = capsys.readouterr().err
    assert "4:13:" in err


def test_bad_dt_exit_2():
    assert main(["run", "cat_v1", "--dt", "0.0007"]) == 2


def test_runtime_error_exit_3(monkeypatch, capsys):
    monkeypatch.setenv("ORULES_WORKERS", "-1")
    assert main(["run", "cat_v1", "--runs", "2"]) == 3
    assert "ORULES_WORKERS" in capsys.readouterr().err


def test_check_ok(capsys):
    assert main(["check", "cat_v2_natural_wake"]) == 0
    assert "ok" in capsys.readouterr().out


def test_trace_stdout(capsys):
    assert main(["trace", "cat_v1", "--seed", "7", "--no-prune"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("0.0,start,")
    assert not any(",prune," in line for line in lines)


def test_trace_strict(capsys):
    assert main(["trace", "cat_v2", "--seed", "1", "--strict-orule1"]) == 0


def test_help_lists_every_flag():
    sub = build_parser()._subparsers._group_actions[0].choices
    text = sub["run"].format_help()
    for flag in ("--runs", "--seed", "--dt", "--strict-orule1", "--no-prune",
                 "--trace-out", "--stats-out"):
        assert flag in text


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "orules.cli", "--help"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert "run" in res.stdout and "check" in res.stdout


@pytest.mark.parametrize("argv", [[], ["run"], ["bogus", "x"]])
def test_usage_errors(argv):
    assert main(argv) == 2
