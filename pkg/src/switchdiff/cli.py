"""Scenario files and the ``switchdiff`` command.

A scenario is an INI file with four sections::

    [scenario]
    model = custom-constant      # logistic | pollution | lqg | custom-constant
    command = verify-measure     # see COMMANDS
    output_dir = out

    [model]                      # builder parameters, see MODEL_KEYS
    rates = 1-2:0.6, 2-1:0.9
    drift = -1
    level = 0, 1
    sigma = 0.5

    [sim]
    dt = 0.005
    T = 1
    seed = 7
    x0 = 0.2
    i0 = 1

    [command]                    # command parameters, see COMMAND_KEYS
    N = 20000
    patterns = none; 2
    f = one

Per-regime values are comma lists (regime 1 first, the last entry repeats).
Matrices are rows separated by ';', and per-regime matrices are separated
by '|'.  Inline comments start with '#'.  Unknown keys and bad values are reported with their line number.

Exit codes: 0 success, 1 usage or configuration error, 2 verification
verdict failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import os
import re
import sys
import time
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from . import suite
from .errors import ScenarioError, SwitchDiffError
from .examples import (
    LogisticParams, LqgParams, PollutionParams, build_logistic, build_lqg, build_pollution,
    evaluate_quadratic_cost, evaluate_welfare,
)
from .generator import dynkin_check, intensity_probe
from .girsanov import JumpPattern, measure_comparison
from .history import constant_segment
from .integrator import STATUS_NAMES, SimConfig, run_batch
from .model import GlobalBound, HybridModel, constant_kernel, validate_model
from .stats import default_workers, feller_probe, strong_feller_probe

COMMANDS = (
    "simulate", "verify-measure", "probe-intensity", "probe-feller",
    "probe-strong-feller", "dynkin", "evaluate-cost", "validate",
)
MODELS = ("logistic", "pollution", "lqg", "custom-constant")

MODEL_KEYS = {
    "logistic": {"a", "b", "sigma", "beta_weight", "delta_weight", "r", "weight_sup", "log_transformed"},
    "pollution": {"rho", "sigma", "policy", "K0", "utility_kappa", "kappa_up", "kappa_down", "r"},
    "lqg": {"A", "B", "Sigma", "M", "N_cost", "D_terminal", "gain", "rates"},
    "custom-constant": {"rates", "drift", "level", "sigma", "M"},
}
SIM_KEYS = {"dt", "T", "seed", "max_jumps", "explosion_threshold", "x0", "i0"}
COMMAND_KEYS = {
    "simulate": ({"N"}, set()),
    "verify-measure": ({"N", "patterns"}, {"f"}),
    "probe-intensity": ({"N", "j", "deltas"}, set()),
    "probe-feller": ({"N", "radii"}, {"f", "family"}),
    "probe-strong-feller": ({"N", "radii"}, {"threshold"}),
    "dynkin": ({"N", "f"}, set()),
    "evaluate-cost": ({"N"}, set()),
    "validate": ({"samples", "regimes"}, set()),
}
SECTIONS = ("scenario", "model", "sim", "command")


# ---------------------------------------------------------------- parsing

class Scenario:
    """Parsed scenario with the source line of every key, for error messages."""

    def __init__(self, path):
        self.path = Path(path)
        try:
            text = self.path.read_text()
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario: {exc}") from None
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(text, source=str(self.path))
        except configparser.MissingSectionHeaderError as exc:
            raise ScenarioError("key outside any section", exc.lineno) from None
        except configparser.DuplicateOptionError as exc:
            raise ScenarioError(f"duplicate key {exc.option!r}", exc.lineno) from None
        except configparser.DuplicateSectionError as exc:
            raise ScenarioError(f"duplicate section [{exc.section}]", exc.lineno) from None
        except configparser.ParsingError as exc:
            lineno = exc.errors[0][0] if exc.errors else None
            raise ScenarioError("cannot parse line", lineno) from None
        self.lines = _line_index(text)
        for sec in parser.sections():
            if sec not in SECTIONS:
                raise ScenarioError(f"unknown section [{sec}]", self.lines.get((sec, None)))
        self.data = {sec: dict(parser[sec]) if parser.has_section(sec) else {} for sec in SECTIONS}
        sc = self.data["scenario"]
        for key in sc:
            if key not in ("model", "command", "output_dir"):
                self.fail("scenario", key, f"unknown key {key!r}")
        if "model" not in sc:
            raise ScenarioError("[scenario] needs a model", self.lines.get(("scenario", None)))
        self.model_name = sc["model"]
        if self.model_name not in MODELS:
            self.fail("scenario", "model", f"unknown model {self.model_name!r} (choose from {', '.join(MODELS)})")
        self.command = sc.get("command")
        self.output_dir = sc.get("output_dir", "out")
        for key in self.data["model"]:
            if key not in MODEL_KEYS[self.model_name]:
                self.fail("model", key, f"unknown key {key!r} for model {self.model_name}")
        for key in self.data["sim"]:
            if key not in SIM_KEYS:
                self.fail("sim", key, f"unknown key {key!r}")

    def line(self, section, key=None):
        return self.lines.get((section, key), self.lines.get((section, None)))

    def fail(self, section, key, message):
        raise ScenarioError(message, self.line(section, key))

    def get(self, section, key, convert, default=None, required=False):
        raw = self.data[section].get(key)
        if raw is None:
            if required:
                raise ScenarioError(f"[{section}] needs {key!r}", self.line(section))
            return default
        try:
            return convert(raw)
        except (ValueError, TypeError, KeyError) as exc:
            self.fail(section, key, f"bad value for {key!r}: {exc}")

    def check_command(self, command):
        if command not in COMMANDS:
            self.fail("scenario", "command", f"unknown command {command!r} (choose from {', '.join(COMMANDS)})")
        required, optional = COMMAND_KEYS[command]
        have = set(self.data["command"])
        for key in sorted(have - required - optional):
            self.fail("command", key, f"unknown key {key!r} for command {command}")
        missing = sorted(required - have)
        if missing:
            raise ScenarioError(f"command {command} needs {', '.join(missing)}", self.line("command"))


def _line_index(text):
    out = {}
    section = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            out.setdefault((section, None), n)
            continue
        m = re.match(r"([^=:;#\s][^=:]*?)\s*[=:]", line)
        if m and section is not None and not raw[:1].isspace():
            out.setdefault((section, m.group(1).strip()), n)
    return out


def parse_float(s):
    return float(s)


def parse_int(s):
    try:
        return int(s)
    except ValueError:
        v = float(s)  # allows 1e5
        if not v.is_integer():
            raise ValueError(f"{s!r} is not an integer") from None
        return int(v)


def parse_bool(s):
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{s!r} is not a boolean")


def parse_list(s, item=float):
    parts = [p.strip() for p in s.split(",") if p.strip()]
    if not parts:
        raise ValueError("empty list")
    return [item(p) for p in parts]


def parse_regime_scalar(s):
    """A number, or a comma list indexed by regime."""
    vals = parse_list(s)
    return vals[0] if len(vals) == 1 else vals


def parse_matrix(s):
    rows = [parse_list(r) for r in s.split(";") if r.strip()]
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValueError("matrix rows must have equal length")
    return np.array(rows)


def parse_regime_matrix(s):
    mats = [parse_matrix(m) for m in s.split("|")]
    return mats[0] if len(mats) == 1 else mats


def parse_rates(s):
    """``i-j:q`` entries separated by commas."""
    out = {}
    for part in s.split(","):
        part = part.strip()
        if not part:
            continue
        m = re.fullmatch(r"(\d+)\s*-\s*(\d+)\s*:\s*(\S+)", part)
        if not m:
            raise ValueError(f"rate entry {part!r} is not of the form i-j:q")
        out[(int(m.group(1)), int(m.group(2)))] = float(m.group(3))
    if not out:
        raise ValueError("no rates given")
    return out


def parse_patterns(s):
    """Jump patterns separated by ';', each a space or comma separated target list or 'none'."""
    out = []
    for part in s.split(";"):
        part = part.strip()
        if not part:
            continue
        if part.lower() == "none":
            out.append(())
        else:
            out.append(tuple(int(t) for t in re.split(r"[\s,>]+", part) if t))
    if not out:
        raise ValueError("no patterns given")
    return out


# ---------------------------------------------------------------- models

def build_model(sc: Scenario):
    name = sc.model_name
    g = sc.get
    if name == "logistic":
        p = LogisticParams(
            a=g("model", "a", parse_regime_scalar, 1.0),
            b=g("model", "b", parse_regime_scalar, 1.0),
            sigma=g("model", "sigma", parse_regime_scalar, 0.3),
            beta_weight=g("model", "beta_weight", parse_regime_scalar, 1.0),
            delta_weight=g("model", "delta_weight", parse_regime_scalar, 0.0),
            r=g("model", "r", parse_float, 1.0),
            weight_sup=g("model", "weight_sup", parse_float, None),
        )
        return build_logistic(p, g("model", "log_transformed", parse_bool, True)), p
    if name == "pollution":
        sig = g("model", "sigma", parse_regime_scalar, None)
        p = PollutionParams(
            rho=g("model", "rho", parse_regime_scalar, 1.0),
            sigma=None if sig is None else _constant_sigma(sig),
            policy=g("model", "policy", parse_regime_scalar, 0.5),
            K0=g("model", "K0", parse_float, 1.0),
            utility_kappa=g("model", "utility_kappa", parse_float, 0.5),
            kappa_up=g("model", "kappa_up", parse_float, 0.5),
            kappa_down=g("model", "kappa_down", parse_float, 0.5),
        )
        return build_pollution(p, g("model", "r", parse_float, 0.5)), p
    if name == "lqg":
        kw = {}
        for key in ("A", "B", "Sigma", "M", "N_cost", "gain"):
            v = g("model", key, parse_regime_matrix)
            if v is not None:
                kw[key] = v
        kw["D_terminal"] = g("model", "D_terminal", parse_matrix, 0.0)
        kw["rates"] = g("model", "rates", parse_rates, {(1, 2): 1.0, (2, 1): 1.0})
        if "Sigma" not in kw:
            kw["Sigma"] = 0.5
        p = LqgParams(**kw)
        return build_lqg(p), p
    rates = g("model", "rates", parse_rates, required=True)
    drift = g("model", "drift", parse_regime_scalar, 0.0)
    level = g("model", "level", parse_regime_scalar, 0.0)
    sigma = g("model", "sigma", parse_regime_scalar, 1.0)
    M = g("model", "M", parse_float, None)
    return custom_constant_model(rates, drift, level, sigma, M), None


def _constant_sigma(value):
    from .examples import _per_regime

    def sigma(x, i):
        return _per_regime(value, i) + 0.0 * x

    return sigma


def custom_constant_model(rates, drift=0.0, level=0.0, sigma=1.0, M=None) -> HybridModel:
    """Constant switching rates; b(x, i) = level_i + drift_i x, sigma(x, i) = sigma_i."""
    from .examples import _per_regime

    intensity, total = constant_kernel(rates)
    exits = {}
    for (i, _), q in rates.items():
        exits[i] = exits.get(i, 0.0) + q
    bound = GlobalBound(M if M is not None else max(list(exits.values()) + [1e-12]))

    def b(x, i):
        return (_per_regime(level, i) + _per_regime(drift, i) * x[:, 0])[:, None]

    def s(x, i):
        return _per_regime(sigma, i).reshape(-1, 1, 1)

    return HybridModel(1, 1, 0.0, b, s, intensity, total, bound, name="custom-constant")


# ---------------------------------------------------------------- test functions

SEGMENT_FUNCTIONS = {
    "one": lambda seg, i: np.ones(len(i)),
    "bounded": suite._bounded_f,
    "tanh": lambda seg, i: np.tanh(seg.current[:, 0]) + 1.0 / np.asarray(i),
}
TEST_FUNCTIONS = {
    "occupancy": suite.occupancy_function,
    "sine-mix": suite.sine_mix_function,
    "gaussian-bump": suite.gaussian_bump_function,
}


def _lookup(table, name, what):
    if name not in table:
        raise KeyError(f"unknown {what} {name!r} (choose from {', '.join(table)})")
    return table[name]


# ---------------------------------------------------------------- commands

def _sim_config(sc, seed_override):
    dt = sc.get("sim", "dt", parse_float, required=True)
    T = sc.get("sim", "T", parse_float, required=True)
    seed = seed_override if seed_override is not None else sc.get("sim", "seed", parse_int, suite.DEFAULT_SEED)
    try:
        return SimConfig(
            dt, T, master_seed=seed,
            max_jumps=sc.get("sim", "max_jumps", parse_int, 10_000),
            explosion_threshold=sc.get("sim", "explosion_threshold", parse_float, 1e8),
        )
    except SwitchDiffError as exc:
        raise ScenarioError(str(exc), sc.line("sim", "dt")) from None


def _initial(sc, model, cfg):
    x0 = sc.get("sim", "x0", parse_list, [0.0])
    if len(x0) != model.dim_n:
        sc.fail("sim", "x0", f"x0 has {len(x0)} components, model state has {model.dim_n}")
    return constant_segment(np.array(x0), model.delay_r, cfg.dt)


def _est(e):
    return e.to_dict()


def cmd_simulate(sc, model, params, cfg, workers):
    N = sc.get("command", "N", parse_int)
    if N < 1:
        sc.fail("command", "N", "N must be positive")
    phi0 = _initial(sc, model, cfg)
    i0 = sc.get("sim", "i0", parse_int, 1)
    res = run_batch(model, phi0, i0, cfg, np.arange(N), "hybrid", record=True)
    times = np.arange(cfg.n_steps + 1) * cfg.dt
    rows = []
    for p in range(N):
        for k, t in enumerate(times):
            if t > res.end_time[p] + 1e-12:
                break
            rows.append([p, t, *res.states[p, k], int(res.grid_regimes[p, k])])
    jumps = [
        {"path": p, "time": ev.time, "from": ev.from_, "to": ev.to}
        for p in range(N) for ev in res.jump_logs[p]
    ]
    status = [STATUS_NAMES[int(s)] for s in res.status]
    summary = {
        "paths": N,
        "status_counts": {name: status.count(name) for name in sorted(set(status))},
        "jumps_total": int(res.n_jumps.sum()),
        "final_regime_counts": {str(int(k)): int(v) for k, v in zip(*np.unique(res.final_regime, return_counts=True))},
    }
    return summary, True, {"paths": (model.dim_n, rows), "jumps": jumps}


def cmd_verify_measure(sc, model, params, cfg, workers):
    N = sc.get("command", "N", parse_int)
    i0 = sc.get("sim", "i0", parse_int, 1)
    fname = sc.get("command", "f", str, "one")
    f = sc.get("command", "f", lambda s: _lookup(SEGMENT_FUNCTIONS, s, "function"), SEGMENT_FUNCTIONS["one"])
    pats = sc.get("command", "patterns", lambda s: [JumpPattern(i0, t) for t in parse_patterns(s)])
    reps = measure_comparison(model, {fname: f}, pats, _initial(sc, model, cfg), i0, cfg, N, workers=workers)
    return {"comparisons": reps}, all(r["verdict"] == "pass" for r in reps), None


def cmd_probe_intensity(sc, model, params, cfg, workers):
    N = sc.get("command", "N", parse_int)
    j = sc.get("command", "j", parse_int)
    deltas = sc.get("command", "deltas", parse_list)
    i0 = sc.get("sim", "i0", parse_int, 1)
    res = intensity_probe(model, _initial(sc, model, cfg), i0, j, deltas, N, cfg.master_seed, workers)
    rows = [r.__dict__ for r in res["rows"]]
    ok = abs(rows[0]["z"]) < 3 and all(r["passed"] for r in res["richardson"])
    return {"rows": rows, "target": res["target"], "diag_target": res["diag_target"],
            "richardson": res["richardson"]}, ok, None


def cmd_probe_feller(sc, model, params, cfg, workers):
    N = sc.get("command", "N", parse_int)
    radii = sc.get("command", "radii", parse_list)
    f = sc.get("command", "f", lambda s: _lookup(SEGMENT_FUNCTIONS, s, "function"), SEGMENT_FUNCTIONS["tanh"])
    family = sc.get("command", "family", str, "shift")
    i0 = sc.get("sim", "i0", parse_int, 1)
    res = feller_probe(model, f, _initial(sc, model, cfg), i0, radii, cfg, N, family, workers=workers)
    ok = res["zero_difference"] == 0.0 and res["non_increasing"]
    return {"rows": [r.__dict__ for r in res["rows"]], "zero_difference": res["zero_difference"],
            "non_increasing": res["non_increasing"], "base": _est(res["base"]),
            "consistent_with_continuity": res["consistent_with_continuity"], "family": family}, ok, None


def cmd_probe_strong_feller(sc, model, params, cfg, workers):
    N = sc.get("command", "N", parse_int)
    radii = sc.get("command", "radii", parse_list)
    c = sc.get("command", "threshold", parse_float, 0.0)
    i0 = sc.get("sim", "i0", parse_int, 1)
    x0 = sc.get("sim", "x0", parse_list, [0.0])

    def g(x, i):
        return (x[:, 0] > c).astype(float)

    res = strong_feller_probe(model, g, x0, i0, radii, cfg, N, workers=workers)
    return {"rows": [r.__dict__ for r in res["rows"]], "base": _est(res["base"]),
            "consistent_with_continuity": res["consistent_with_continuity"], "threshold": c}, \
        bool(res["consistent_with_continuity"]), None


def cmd_dynkin(sc, model, params, cfg, workers):
    N = sc.get("command", "N", parse_int)
    f = sc.get("command", "f", lambda s: _lookup(TEST_FUNCTIONS, s, "test function")())
    i0 = sc.get("sim", "i0", parse_int, 1)
    x0 = sc.get("sim", "x0", parse_list, [0.0])
    res = dynkin_check(f, model, np.array(x0), i0, cfg, N, workers)
    return {"residual": _est(res["residual"]), "residual_half_dt": _est(res["residual_half"]),
            "terminal": _est(res["terminal"]), "bias_budget": res["bias_budget"],
            "threshold": res["threshold"], "f": f.name}, bool(res["passed"]), None


def cmd_evaluate_cost(sc, model, params, cfg, workers):
    N = sc.get("command", "N", parse_int)
    i0 = sc.get("sim", "i0", parse_int, 1)
    x0 = sc.get("sim", "x0", parse_list, [0.0])
    if sc.model_name == "pollution":
        e = evaluate_welfare(model, params, cfg, N, np.array(x0), i0, workers)
        return {"welfare": _est(e)}, True, None
    if sc.model_name == "lqg":
        e = evaluate_quadratic_cost(model, params, cfg, N, np.array(x0), i0, workers)
        return {"cost": _est(e)}, True, None
    sc.fail("scenario", "model", "evaluate-cost needs the pollution or lqg model")


def cmd_validate(sc, model, params, cfg, workers):
    samples = sc.get("command", "samples", parse_list)
    regimes = sc.get("command", "regimes", lambda s: parse_list(s, int))
    segs = [constant_segment(np.full(model.dim_n, v), model.delay_r, cfg.dt) for v in samples]
    rep = validate_model(model, segs, regimes)
    return {"rows": rep.rows, "lipschitz_estimates": {str(k): v for k, v in rep.lipschitz_estimates.items()}}, \
        rep.passed, None


HANDLERS = {
    "simulate": cmd_simulate,
    "verify-measure": cmd_verify_measure,
    "probe-intensity": cmd_probe_intensity,
    "probe-feller": cmd_probe_feller,
    "probe-strong-feller": cmd_probe_strong_feller,
    "dynkin": cmd_dynkin,
    "evaluate-cost": cmd_evaluate_cost,
    "validate": cmd_validate,
}


# ---------------------------------------------------------------- output

def _version():
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"switchdiff": pkg, "numpy": np.__version__, "python": sys.version.split()[0]}


def _json_safe(obj):
    return suite._clean(obj)


def write_json(path, obj):
    Path(path).write_text(json.dumps(_json_safe(obj), sort_keys=True, indent=2) + "\n")


def write_outputs(out_dir, command, summary, extra):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if extra:
        n, rows = extra["paths"]
        with open(out / "paths.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["path", "time"] + [f"x_{k + 1}" for k in range(n)] + ["regime"])
            for row in rows:
                w.writerow([row[0]] + ["%.17g" % v for v in row[1:-1]] + [row[-1]])
        with open(out / "jumps.jsonl", "w") as fh:
            for ev in extra["jumps"]:
                fh.write(json.dumps(ev, sort_keys=True) + "\n")
    write_json(out / "summary.json", summary)


def run_scenario(path, command=None, seed=None, workers=None, out=None) -> int:
    """Load, validate and run one scenario; returns the exit code."""
    t0 = time.perf_counter()
    started = datetime.now(timezone.utc).isoformat()
    sc = Scenario(path)
    command = command or sc.command
    if command is None:
        raise ScenarioError("[scenario] needs a command", sc.line("scenario"))
    sc.check_command(command)
    cfg = _sim_config(sc, seed)
    try:
        model, params = build_model(sc)
    except ScenarioError:
        raise
    except SwitchDiffError as exc:
        raise ScenarioError(f"model parameters rejected: {exc}", sc.line("model")) from None
    workers = workers or default_workers()
    try:
        body, passed, extra = HANDLERS[command](sc, model, params, cfg, workers)
    except ScenarioError:
        raise
    except SwitchDiffError as exc:
        raise ScenarioError(f"{command} failed: {exc}", sc.line("command")) from None
    summary = {
        "command": command,
        "model": sc.model_name,
        "scenario": {sec: dict(sorted(v.items())) for sec, v in sc.data.items()},
        "seed": cfg.master_seed,
        "N": sc.get("command", "N", parse_int, None),
        "dt": cfg.dt,
        "T": cfg.horizon_T,
        "verdict": "pass" if passed else "fail",
        "results": body,
        "versions": _version(),
        "timestamp": {"started": started, "elapsed_seconds": time.perf_counter() - t0},
    }
    target = out or sc.output_dir
    write_outputs(target, command, summary, extra)
    print(f"{command}: {summary['verdict']} -> {Path(target) / 'summary.json'}")
    return 0 if passed else 2


def run_verification_suite(seed=None, workers=None, out=None, repeat=True) -> int:
    seed = suite.DEFAULT_SEED if seed is None else seed
    workers = workers or default_workers()

    def progress(res, secs):
        print(f"[{'PASS' if res['passed'] else 'FAIL'}] {res['name']} ({secs:.1f} s)", flush=True)

    report = suite.run_verification_suite(seed, workers, repeat, progress)
    report["versions"] = _version()
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        write_json(Path(out) / "suite-report.json", report)
    print(f"suite: {'pass' if report['passed'] else 'fail'}")
    return 0 if report["passed"] else 2


# ---------------------------------------------------------------- entry point

def _env_int(name):
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ScenarioError(f"environment variable {name} must be an integer, got {raw!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="switchdiff", description="Past-dependent switching diffusions.")
    p.add_argument("verb", choices=("run", "suite", "verify") + COMMANDS,
                   help="'run' uses the scenario's command; 'verify' is short for verify-measure")
    p.add_argument("scenario", nargs="?", help="scenario file (not used by 'suite')")
    p.add_argument("--seed", type=int, help="master seed (overrides SWITCHDIFF_SEED and the scenario)")
    p.add_argument("--workers", type=int, help="worker processes (overrides SWITCHDIFF_WORKERS)")
    p.add_argument("--out", help="output directory (overrides the scenario's output_dir)")
    p.add_argument("--once", action="store_true", help="suite: skip the second run for the byte comparison")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        seed = args.seed if args.seed is not None else _env_int("SWITCHDIFF_SEED")
        workers = args.workers if args.workers is not None else _env_int("SWITCHDIFF_WORKERS")
        if workers is not None and workers < 1:
            raise ScenarioError("workers must be positive")
        if args.verb == "suite":
            return run_verification_suite(seed, workers, args.out, repeat=not args.once)
        if not args.scenario:
            raise ScenarioError(f"'{args.verb}' needs a scenario file")
        command = {"run": None, "verify": "verify-measure"}.get(args.verb, args.verb)
        return run_scenario(args.scenario, command, seed, workers, args.out)
    except ScenarioError as exc:
        print(f"error: {args.scenario or 'switchdiff'}: {exc}", file=sys.stderr)
        return 1
    except SwitchDiffError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
