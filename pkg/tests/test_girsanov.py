import math

import numpy as np
import pytest

from switchdiff.errors import DomainError
from switchdiff.examples import LogisticParams, build_logistic
from switchdiff.girsanov import (
    JumpPattern, compare_measures, estimate_lhs, estimate_rhs, measure_comparison, rn_weight,
)
from switchdiff.history import constant_segment
from switchdiff.integrator import SimConfig, run_batch, simulate_markov_modulated
from switchdiff.stats import McEstimate

from conftest import constant_model

CFG = SimConfig(0.01, 1.0, master_seed=17)
PHI = constant_segment(0.0, 0.0, 0.01)


def one(seg, i):
    return np.ones(len(i))


def find_path(model, predicate, limit=500):
    for p in range(limit):
        traj = simulate_markov_modulated(model, PHI, 1, CFG, path_index=p)
        if predicate(traj):
            return traj
    raise AssertionError("no path with the requested jump log")


def test_weight_without_jumps():
    model = constant_model({(1, 2): 0.3, (2, 1): 0.5})
    traj = find_path(model, lambda t: not t.jumps)
    assert rn_weight(traj, model, JumpPattern(1), 1.0, 0.01) == pytest.approx(math.exp(1.0 - 0.3), rel=1e-12)


def test_weight_is_zero_off_pattern():
    model = constant_model({(1, 2): 0.3, (2, 1): 0.5})
    traj = find_path(model, lambda t: len(t.jumps) >= 1)
    assert rn_weight(traj, model, JumpPattern(1), 1.0) == 0.0


def test_weight_with_one_jump():
    model = constant_model({(1, 2): 0.3, (2, 1): 0.5})
    traj = find_path(model, lambda t: [ev.to for ev in t.jumps] == [2])
    s = traj.jumps[0].time
    expected = math.exp(1.0) * (0.3 / 0.5) * math.exp(-0.3 * s - 0.5 * (1.0 - s))
    assert rn_weight(traj, model, JumpPattern(1, (2,)), 1.0) == pytest.approx(expected, rel=1e-12)


def test_pattern_validation():
    with pytest.raises(DomainError):
        JumpPattern(1, (1,))
    with pytest.raises(DomainError):
        JumpPattern(1, (2, 2))
    with pytest.raises(DomainError):
        JumpPattern(0)
    p = JumpPattern(1, (2, 3))
    assert p.l == 2 and p.final == 3


def test_lhs_survival_and_partition():
    c, N = 0.4, 100_000
    model = constant_model({(1, 2): c, (2, 1): c})
    cfg = SimConfig(0.1, 1.0, master_seed=3)
    phi = constant_segment(0.0, 0.0, cfg.dt)
    none = estimate_lhs(model, one, JumpPattern(1), phi, 1, cfg, N)
    assert abs(none.mean - math.exp(-c)) < 3 * none.se
    single = estimate_lhs(model, one, JumpPattern(1, (2,)), phi, 1, cfg, N)
    res = run_batch(model, phi, 1, cfg, np.arange(N), track=1)
    rest = np.mean(res.n_jumps >= 2)
    assert none.mean + single.mean + rest == pytest.approx(1.0, abs=1e-12)


def test_lhs_without_switching_is_exact():
    model = constant_model({}, drift=-1.0, sigma=0.3)
    est = estimate_lhs(model, lambda seg, i: (i == 1).astype(float), JumpPattern(1), PHI, 1, CFG, 1000)
    assert est.mean == 1.0 and est.se == 0.0


def test_rhs_examples():
    c, N = 0.4, 100_000
    model = constant_model({(1, 2): c, (2, 1): c})
    cfg = SimConfig(0.1, 1.0, master_seed=5)
    phi = constant_segment(0.0, 0.0, cfg.dt)
    est = estimate_rhs(model, one, JumpPattern(1), phi, 1, cfg, N)
    assert abs(est.mean - math.exp(-c)) < 3 * est.se
    zero = estimate_rhs(model, lambda seg, i: np.zeros(len(i)), JumpPattern(1), phi, 1, cfg, 1000)
    assert zero.mean == 0.0


def test_compare_measures_examples():
    a = McEstimate(1.0, 0.1, 100, 0, 0)
    same = compare_measures(a, a)
    assert same["z"] == 0.0 and same["verdict"] == "pass"
    far = McEstimate(1.0 + 10 * math.sqrt(0.02), 0.1, 100, 0, 0)
    assert compare_measures(far, a)["verdict"] == "fail"


def test_measure_comparison_constant_kernel():
    model = constant_model({(1, 2): 0.4, (2, 1): 0.4})
    cfg = SimConfig(0.1, 1.0, master_seed=8)
    reps = measure_comparison(model, {"one": one}, [JumpPattern(1)], constant_segment(0.0, 0.0, 0.1), 1, cfg, 100_000)
    assert reps[0]["verdict"] == "pass"
    assert reps[0]["seeds"]["lhs"] != reps[0]["seeds"]["rhs"]


def test_measure_comparison_three_regimes_one_jump():
    model = constant_model({(1, 2): 0.3, (1, 3): 0.6, (2, 1): 0.5, (3, 1): 0.2, (2, 3): 0.1}, drift=-0.5, sigma=0.4)
    cfg = SimConfig(0.02, 1.0, master_seed=9)

    def f(seg, i):
        return np.cos(seg.current[:, 0]) + i

    reps = measure_comparison(model, {"f": f}, [JumpPattern(1, (2,)), JumpPattern(1, (3,))],
                              constant_segment(0.5, 0.0, 0.02), 1, cfg, 40_000)
    assert all(r["verdict"] == "pass" for r in reps)


def test_weights_are_nonnegative():
    model = build_logistic(LogisticParams(a=1.0, b=1.0, sigma=0.3, beta_weight=0.8, delta_weight=0.6, r=0.5))
    cfg = SimConfig(0.01, 1.0, master_seed=4)
    res = run_batch(model, constant_segment(0.0, 0.5, 0.01), 1, cfg, np.arange(2000), "markov")
    assert np.all(res.weight_product >= 0) and np.all(res.intensity_integral >= 0)
