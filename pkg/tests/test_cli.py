import csv
import json
from pathlib import Path

import numpy as np
import pytest

from switchdiff.cli import (
    ScenarioError, main, parse_int, parse_matrix, parse_patterns, parse_rates, parse_regime_matrix,
)

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def write(tmp_path, text, name="s.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


CONSTANT = """\
[scenario]
model = custom-constant
command = {command}
output_dir = {out}

[model]
rates = 1-2:0.6, 2-1:0.9
drift = -1
level = 0, 1
sigma = 0.5
{extra_model}
[sim]
dt = 0.01
T = 1
seed = 7
x0 = 0.2
i0 = 1

[command]
{command_body}
"""


def constant(tmp_path, command, body, extra_model=""):
    return write(tmp_path, CONSTANT.format(command=command, out=tmp_path / "out", command_body=body,
                                           extra_model=extra_model))


def read_summary(out):
    return json.loads((Path(out) / "summary.json").read_text())


def test_simulate_lqg_output_schema(tmp_path):
    out = tmp_path / "lqg"
    assert main(["run", str(SCENARIOS / "simulate_lqg.ini"), "--out", str(out)]) == 0
    with open(out / "paths.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["path", "time", "x_1", "x_2", "regime"]
    t = np.array([float(r[1]) for r in rows[1:]])
    assert t[0] == 0.0 and t[-1] == pytest.approx(2.0)
    assert np.all(np.diff(t) > 0)
    assert {int(r[4]) for r in rows[1:]} <= {1, 2}
    summary = read_summary(out)
    for key in ("command", "model", "scenario", "seed", "N", "dt", "T", "verdict", "results", "versions", "timestamp"):
        assert key in summary
    for line in (out / "jumps.jsonl").read_text().splitlines():
        json.loads(line)


def test_verify_measure_passes_and_reruns_identically(tmp_path):
    path = constant(tmp_path, "verify-measure", "N = 4000\npatterns = none; 2\nf = bounded")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", path, "--out", str(a)]) == 0
    assert main(["verify", path, "--out", str(b)]) == 0
    sa, sb = read_summary(a), read_summary(b)
    assert sa["verdict"] == "pass"
    sa.pop("timestamp"), sb.pop("timestamp")
    assert json.dumps(sa, sort_keys=True) == json.dumps(sb, sort_keys=True)


def test_seed_override_from_environment(tmp_path, monkeypatch):
    path = constant(tmp_path, "simulate", "N = 1")
    monkeypatch.setenv("SWITCHDIFF_SEED", "99")
    assert main(["run", path, "--out", str(tmp_path / "env")]) == 0
    assert read_summary(tmp_path / "env")["seed"] == 99
    assert main(["run", path, "--seed", "5", "--out", str(tmp_path / "flag")]) == 0
    assert read_summary(tmp_path / "flag")["seed"] == 5


def test_unknown_key_reports_line(tmp_path, capsys):
    path = constant(tmp_path, "simulate", "N = 1\nbogus = 3")
    assert main(["run", path]) == 1
    err = capsys.readouterr().err
    line = Path(path).read_text().splitlines().index("bogus = 3") + 1
    assert "bogus" in err and f"line {line}:" in err


def test_bad_value_reports_line(tmp_path, capsys):
    text = CONSTANT.format(command="simulate", out=tmp_path, command_body="N = 1", extra_model="")
    path = write(tmp_path, text.replace("dt = 0.01", "dt = fast"))
    assert main(["run", path]) == 1
    line = Path(path).read_text().splitlines().index("dt = fast") + 1
    assert f"line {line}:" in capsys.readouterr().err


def test_missing_command_key(tmp_path, capsys):
    path = constant(tmp_path, "verify-measure", "N = 10")
    assert main(["run", path]) == 1
    assert "patterns" in capsys.readouterr().err


def test_usage_errors_exit_one(tmp_path):
    assert main(["frobnicate"]) == 1
    assert main(["run"]) == 1
    assert main(["run", str(tmp_path / "missing.ini")]) == 1


def test_validate_failure_exits_two(tmp_path):
    path = constant(tmp_path, "validate", "samples = 0, 1\nregimes = 1, 2", extra_model="M = 0.5\n")
    assert main(["run", path, "--out", str(tmp_path / "v")]) == 2
    assert read_summary(tmp_path / "v")["verdict"] == "fail"


def test_validate_success(tmp_path):
    path = constant(tmp_path, "validate", "samples = 0, 1\nregimes = 1, 2", extra_model="M = 2\n")
    assert main(["run", path, "--out", str(tmp_path / "v")]) == 0


def test_value_parsers():
    assert parse_int("1e5") == 100_000
    assert parse_int("18446744073709551615") == 2 ** 64 - 1
    assert parse_matrix("1, 2; 3, 4").tolist() == [[1, 2], [3, 4]]
    assert [m.tolist() for m in parse_regime_matrix("1 | 2")] == [[[1.0]], [[2.0]]]
    assert parse_rates("1-2:0.5, 2-1:1") == {(1, 2): 0.5, (2, 1): 1.0}
    assert parse_patterns("none; 2; 2,3") == [(), (2,), (2, 3)]
    for bad, fn in (("x", parse_int), ("1-2", parse_rates), ("1,2;3", parse_matrix)):
        with pytest.raises((ScenarioError, ValueError)):
            fn(bad)


def test_suite_parser_accepts_options():
    from switchdiff.cli import build_parser
    args = build_parser().parse_args(["suite", "--seed", "3", "--workers", "2", "--once"])
    assert args.verb == "suite" and args.seed == 3 and args.workers == 2 and args.once
