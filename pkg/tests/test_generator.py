import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from switchdiff.examples import LogisticParams, build_logistic
from switchdiff.generator import (
    TestFunction, apply_generator, check_derivatives, dynkin_check, dynkin_residual, generator_batch,
    intensity_probe, jump_term,
)
from switchdiff.history import constant_segment, segment_from_function
from switchdiff.integrator import SimConfig
from switchdiff.model import GlobalBound, HybridModel, constant_coefficients
from switchdiff.suite import gaussian_bump_function, occupancy_function, sine_mix_function

from conftest import constant_model

PHI = constant_segment(3.0, 0.0, 0.1)


def square():
    return TestFunction(lambda x, i: x[:, 0] ** 2, lambda x, i: 2 * x, lambda x, i: np.full((x.shape[0], 1, 1), 2.0), 1e6)


def identity():
    return TestFunction(lambda x, i: x[:, 0], lambda x, i: np.ones_like(x),
                        lambda x, i: np.zeros((x.shape[0], 1, 1)), 1e6)


def indicator(k):
    return TestFunction(lambda x, i: (np.asarray(i) == k).astype(float), lambda x, i: np.zeros_like(x),
                        lambda x, i: np.zeros((x.shape[0], 1, 1)), 1.0)


def constant_f(c):
    return TestFunction(lambda x, i: np.full(x.shape[0], c), lambda x, i: np.zeros_like(x),
                        lambda x, i: np.zeros((x.shape[0], 1, 1)), abs(c))


def test_second_order_term():
    assert apply_generator(square(), constant_model({}, sigma=1.0), PHI, 1).value == pytest.approx(1.0)


def test_first_order_term():
    assert apply_generator(identity(), constant_model({}, drift=2.0, sigma=0.7), PHI, 1).value == pytest.approx(6.0)


def test_jump_term_only():
    val = apply_generator(indicator(2), constant_model({(1, 2): 0.7}), PHI, 1)
    assert val.value == pytest.approx(0.7) and val.jump_term == pytest.approx(0.7)


def logistic():
    return build_logistic(LogisticParams(a=[1.0, 0.7], b=1.0, sigma=[0.3, 0.5], beta_weight=0.8, delta_weight=0.6, r=0.5))


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-1, 1), st.integers(1, 4))
def test_generator_is_linear(a, b, x, i):
    model = logistic()
    phi = segment_from_function(lambda t: x + 0.3 * t, 0.5, 0.05)
    f, g = sine_mix_function(), gaussian_bump_function()
    comb = TestFunction(
        lambda y, k: a * f.value(y, k) + b * g.value(y, k),
        lambda y, k: a * f.gradient(y, k) + b * g.gradient(y, k),
        lambda y, k: a * f.hessian(y, k) + b * g.hessian(y, k),
        abs(a) * f.bound + abs(b) * g.bound,
    )
    lhs = apply_generator(comb, model, phi, i).value
    rhs = a * apply_generator(f, model, phi, i).value + b * apply_generator(g, model, phi, i).value
    assert lhs == pytest.approx(rhs, abs=1e-12 * (1 + abs(lhs)))


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.floats(-2, 2), st.integers(1, 5))
def test_constant_functions_are_annihilated(c, x, i):
    phi = segment_from_function(lambda t: x + t, 0.5, 0.05)
    assert apply_generator(constant_f(c), logistic(), phi, i).value == 0.0


def test_enumerated_and_declared_rows_agree():
    from dataclasses import replace
    model = logistic()
    plain = replace(model, row=None)
    phi = segment_from_function(lambda t: 0.2 - t, 0.5, 0.05)
    for i in (1, 2, 3):
        a = apply_generator(sine_mix_function(), model, phi, i)
        b = apply_generator(sine_mix_function(), plain, phi, i)
        assert a.value == pytest.approx(b.value, rel=1e-12)


def test_truncated_series_reports_remainder():
    def intensity(seg, i, j):
        j = np.asarray(j, dtype=np.float64)
        return np.where((np.asarray(i) == 1) & (j >= 2), np.exp2(-j), 0.0)

    def total(seg, i):
        return np.where(np.asarray(i) == 1, 0.5, 0.0)

    b, s = constant_coefficients([[0.0]], [[0.0]])
    model = HybridModel(1, 1, 0.0, b, s, intensity, total, GlobalBound(1.0))
    seg = PHI.as_batch()
    _, rem = jump_term(indicator(2), model, seg, np.array([1]), j_max=10)
    assert rem[0] == pytest.approx(2 * 2.0 ** -10)


def test_suite_test_functions_have_correct_derivatives():
    pts = np.linspace(-2, 2, 9)[:, None]
    for f in (occupancy_function(), sine_mix_function(), gaussian_bump_function()):
        assert check_derivatives(f, pts, [1, 2, 3])["passed"], f.name


def test_residual_vanishes_for_static_model():
    model = constant_model({}, drift=0.0, sigma=0.0)
    cfg = SimConfig(0.1, 1.0, master_seed=1)
    est = dynkin_residual(sine_mix_function(), model, constant_segment(0.4, 0.0, 0.1), 1, cfg, 100)
    assert est.mean == 0.0 and est.se == 0.0


def test_dynkin_identity_on_clipped_sine_model():
    def drift(x, i):
        return np.clip(-x, -2.0, 2.0) + 0.3 * np.sin(i)[:, None]

    def diffusion(x, i):
        return (0.5 + 0.2 * np.tanh(x[:, 0]))[:, None, None]

    from switchdiff.model import constant_kernel
    intensity, total = constant_kernel({(1, 2): 0.8, (2, 1): 0.5})
    model = HybridModel(1, 1, 0.0, drift, diffusion, intensity, total, GlobalBound(0.8))
    f = TestFunction(lambda x, i: np.sin(x[:, 0]), lambda x, i: np.cos(x), lambda x, i: -np.sin(x)[:, :, None], 1.0, "sin")
    res = dynkin_check(f, model, 0.3, 1, SimConfig(0.01, 1.0, master_seed=2), 40_000)
    assert res["passed"], res


def test_occupancy_closed_form():
    model = constant_model({(1, 2): 1.0, (2, 1): 1.0})
    res = dynkin_check(occupancy_function(), model, 0.0, 1, SimConfig(0.01, 1.0, master_seed=4), 40_000)
    term = res["terminal"]
    assert abs(term.mean - 0.5 * (1 + math.exp(-2))) < 3 * term.se
    assert res["passed"]


def test_probe_without_switching_is_zero():
    res = intensity_probe(constant_model({}), constant_segment(0.0, 0.0, 0.005), 1, 2, [0.01, 0.005], 1000, 3)
    assert all(r.estimate == 0.0 for r in res["rows"])


def test_probe_recovers_constant_rate():
    res = intensity_probe(constant_model({(1, 2): 0.4}), constant_segment(0.0, 0.0, 0.005), 1, 2,
                          [0.01, 0.005], 1_000_000, 7)
    first = res["rows"][0]
    assert abs(first.estimate - 0.4) < 3 * first.se
    assert res["richardson"][0]["passed"]


def test_probe_rejects_off_grid_delta():
    from switchdiff.errors import DomainError
    with pytest.raises(DomainError):
        intensity_probe(constant_model({(1, 2): 0.4}), constant_segment(0.0, 0.0, 0.004), 1, 2, [0.01], 10, 0)


def test_generator_batch_matches_single_points():
    model = logistic()
    phis = [segment_from_function(lambda t, c=c: c + t, 0.5, 0.05) for c in (-0.5, 0.0, 0.7)]
    seg = phis[0].as_batch()
    seg.values = np.stack([p.values for p in phis])
    regimes = np.array([1, 2, 3])
    vals, _ = generator_batch(sine_mix_function(), model, seg, regimes)
    for k, p in enumerate(phis):
        assert vals[k] == pytest.approx(apply_generator(sine_mix_function(), model, p, regimes[k]).value, rel=1e-12)
