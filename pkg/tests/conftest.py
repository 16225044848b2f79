import numpy as np
import pytest

from switchdiff.history import constant_segment
from switchdiff.model import GlobalBound, HybridModel, constant_coefficients, constant_kernel


def constant_model(rates, drift=0.0, sigma=0.0, M=None, r=0.0, name="constant"):
    """One-dimensional model with constant rates, linear drift and additive noise."""
    intensity, total = constant_kernel(rates)
    exits = {}
    for (i, _), q in rates.items():
        exits[i] = exits.get(i, 0.0) + q
    bound = GlobalBound(M if M is not None else max(list(exits.values()) + [1.0]))
    b, s = constant_coefficients([[drift]], [[sigma]])
    return HybridModel(1, 1, r, b, s, intensity, total, bound, name=name)


def binom_se(p, n):
    return float(np.sqrt(p * (1 - p) / n))


@pytest.fixture
def flat():
    return lambda value, r, dt: constant_segment(value, r, dt)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
