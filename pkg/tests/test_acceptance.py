"""The acceptance battery: every criterion at its stated tolerance and time budget.

The battery runs twice with the default seed (the second run feeds the
byte-comparison criterion); each test below checks one criterion.
"""
import pytest

from switchdiff import suite
from switchdiff.stats import default_workers

from conftest import ACCEPTANCE_LINES

# criterion name -> time budget in seconds
BUDGETS = [
    ("reference-chain", 5),
    ("thinning-exactness", 30),
    ("explosion-tail-bound", 30),
    ("short-time-intensity", 120),
    ("change-of-measure", 300),
    ("dynkin-identity", 300),
    ("coupling-identity", 10),
    ("weak-order", 120),
    ("feller-probe", 180),
    ("strong-feller-probe", 120),
    ("reproducibility", 900),
]


@pytest.fixture(scope="session")
def report():
    rep = suite.run_verification_suite(suite.DEFAULT_SEED, default_workers(), repeat=True)
    elapsed = rep["timestamp"]["elapsed_seconds"]
    for k, (name, budget) in enumerate(BUDGETS, start=1):
        res = next((c for c in rep["criteria"] if c["name"] == name), None)
        secs = elapsed.get(name, float("nan"))
        ok = res is not None and res["passed"] and secs < budget
        line = f"criterion {k:2d} {name:22s} {'PASS' if ok else 'FAIL'}  {secs:7.1f} s (budget {budget} s)"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return rep


@pytest.mark.slow
@pytest.mark.parametrize("name,budget", BUDGETS, ids=[n for n, _ in BUDGETS])
def test_criterion(report, name, budget):
    res = next(c for c in report["criteria"] if c["name"] == name)
    assert res["passed"], res
    assert report["timestamp"]["elapsed_seconds"][name] < budget


@pytest.mark.slow
def test_whole_suite_within_budget(report):
    elapsed = report["timestamp"]["elapsed_seconds"]
    total = sum(v for k, v in elapsed.items() if k != "reproducibility") + elapsed["reproducibility"]
    assert total <= 900
    assert report["passed"]
