import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from switchdiff.errors import DomainError, NumericError
from switchdiff.history import (
    Segment, SegmentRing, constant_segment, grid_length, segment_from_function,
)


def test_at_on_constant_segment():
    seg = constant_segment(2.0, 1.0, 0.25)
    assert seg.at(-0.5)[0] == 2.0


def test_at_interpolates_linear_function_exactly():
    seg = segment_from_function(lambda t: t, 1.0, 0.5)
    assert seg.at(-0.25)[0] == pytest.approx(-0.25, abs=1e-15)


def test_at_interpolates_square():
    seg = segment_from_function(lambda t: t * t, 1.0, 0.5)
    assert seg.at(-0.25)[0] == pytest.approx(0.125, abs=1e-15)


def test_at_zero_is_last_value_exactly():
    seg = segment_from_function(lambda t: math.sin(3 * t) + 0.1, 1.0, 0.1)
    assert seg.at(0.0)[0] == seg.values[-1, 0]


def test_at_rejects_out_of_range():
    seg = constant_segment(0.0, 1.0, 0.5)
    with pytest.raises(DomainError):
        seg.at(-1.5)
    with pytest.raises(DomainError):
        seg.at(0.1)


@pytest.mark.parametrize("values,expected", [
    ([[3.0, 4.0]], 5.0),
    ([[-2.0], [1.0], [0.0]], 2.0),
])
def test_sup_norm_examples(values, expected):
    arr = np.array(values)
    r = 0.5 * (len(arr) - 1)
    assert Segment(arr, 0.5, r).sup_norm() == expected


def test_sup_norm_linear():
    seg = segment_from_function(lambda t: t, 1.0, 0.25)
    assert seg.sup_norm() == 1.0


def test_push_examples():
    seg = Segment(np.array([[1.0], [2.0], [3.0]]), 1.0, 2.0)
    assert seg.push([4.0]).values[:, 0].tolist() == [2.0, 3.0, 4.0]
    one = Segment(np.array([[0.0]]), 0.1, 0.0)
    assert one.push([7.0]).values[:, 0].tolist() == [7.0]
    zero = Segment(np.zeros((2, 1)), 1.0, 1.0)
    assert np.array_equal(zero.push([0.0]).values, zero.values)


def test_push_rejects_non_finite():
    seg = constant_segment(0.0, 1.0, 0.5)
    with pytest.raises(NumericError):
        seg.push([np.inf])


def test_segment_from_function_examples():
    assert segment_from_function(lambda t: 5.0, 1.0, 0.5).values[:, 0].tolist() == [5.0, 5.0, 5.0]
    seg = segment_from_function(math.exp, 1.0, 1.0)
    assert seg.values[:, 0].tolist() == [math.exp(-1.0), 1.0]


def test_non_dividing_grid_is_adjusted():
    seg = segment_from_function(lambda t: t, 0.9, 0.4)
    assert seg.length == 3  # floor(0.9 / 0.4) intervals plus the endpoint
    assert seg.delay_r == pytest.approx(0.8)
    assert seg.adjusted
    assert grid_length(0.9, 0.4) == (3, pytest.approx(0.8), True)


def test_dividing_grid_is_not_adjusted():
    assert grid_length(1.0, 0.1) == (11, 1.0, False)
    assert grid_length(0.0, 0.1) == (1, 0.0, False)


def test_length_is_validated():
    with pytest.raises(DomainError):
        Segment(np.zeros((4, 1)), 0.5, 1.0)


def test_initial_function_must_be_finite():
    with pytest.raises(NumericError):
        segment_from_function(lambda t: np.nan, 1.0, 0.5)


finite = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (6, 2), elements=finite), st.lists(arrays(np.float64, 2, elements=finite), min_size=1, max_size=6))
def test_push_then_at_zero_returns_pushed_value(values, pushes):
    seg = Segment(values, 0.2, 1.0)
    for k, v in enumerate(pushes, start=1):
        seg = seg.push(v)
        assert np.array_equal(seg.at(0.0), v)
        # the k most recent values are the pushes, oldest first
        assert np.array_equal(seg.values[-k:], np.stack(pushes[:k]))


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (5, 3), elements=finite), arrays(np.float64, 3, elements=finite))
def test_push_does_not_raise_sup_norm_beyond_max(values, v):
    seg = Segment(values, 0.25, 1.0)
    assert seg.push(v).sup_norm() <= max(seg.sup_norm(), np.linalg.norm(v)) * (1 + 1e-15)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (9, 1), elements=finite), st.floats(-2.0, 0.0), st.floats(-2.0, 0.0))
def test_at_is_lipschitz_in_lag(values, s, t):
    seg = Segment(values, 0.25, 2.0)
    slope = np.max(np.abs(np.diff(values[:, 0]))) / 0.25
    gap = abs(seg.at(s)[0] - seg.at(t)[0])
    assert gap <= slope * abs(s - t) * (1 + 1e-9) + 1e-9


def test_ring_matches_repeated_push():
    rng = np.random.default_rng(0)
    init = segment_from_function(lambda t: [t, -t], 0.5, 0.1)
    ring = SegmentRing(init, 3)
    segs = [init] * 3
    for _ in range(17):
        x = rng.normal(size=(3, 2))
        ring.push(x)
        segs = [s.push(x[p]) for p, s in enumerate(segs)]
        for p in range(3):
            assert np.array_equal(ring.segment().values[p], segs[p].values)
            assert np.array_equal(ring.current()[p], segs[p].current)


def test_ring_without_memory():
    init = constant_segment(1.0, 0.0, 0.1)
    ring = SegmentRing(init, 2)
    ring.push(np.array([[2.0], [3.0]]))
    assert ring.segment().values[:, 0, 0].tolist() == [2.0, 3.0]


def test_tentative_segment_interpolates_between_grid_points():
    init = segment_from_function(lambda t: t, 0.5, 0.1)
    ring = SegmentRing(init, 1)
    seg = ring.tentative(np.array([0]), np.array([[0.05]]), 0.5)
    assert np.allclose(seg.values[0, :-1, 0], init.lags()[:-1] + 0.05)
    assert seg.values[0, -1, 0] == 0.05


def test_integrate_uses_trapezoid_rule():
    seg = segment_from_function(lambda t: t, 1.0, 0.25)
    assert seg.integrate()[0] == pytest.approx(-0.5)
    assert constant_segment(3.0, 0.0, 0.1).integrate()[0] == 0.0
