import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from switchdiff import rng

KAT = [
    ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
    ((0xFFFFFFFF,) * 4, (0xFFFFFFFF,) * 2, (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
    ((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344), (0xA4093822, 0x299F31D0),
     (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1)),
]


@pytest.mark.parametrize("ctr,key,expected", KAT)
def test_philox_known_answers(ctr, key, expected):
    out = rng.philox4x32(*[np.array([c], dtype=np.uint64) for c in ctr], *key)
    assert tuple(int(w[0]) for w in out) == expected


def test_uniform_range_and_shape():
    u = rng.uniforms(3, np.arange(1000), rng.AUX, 0, 5)
    assert u.shape == (1000, 5)
    assert u.min() >= 0.0 and u.max() < 1.0


def test_draws_do_not_depend_on_batch_composition():
    all_paths = rng.normals(11, np.arange(500), rng.BROWNIAN, 7, 3)
    some = rng.normals(11, np.array([499, 3, 250]), rng.BROWNIAN, 7, 3)
    assert np.array_equal(some, all_paths[[499, 3, 250]])


def test_streams_are_separated_by_tag_counter_and_seed():
    base = rng.uniforms(1, [0], rng.PRM, 0, 4)
    assert not np.array_equal(base, rng.uniforms(1, [0], rng.CHAIN, 0, 4))
    assert not np.array_equal(base, rng.uniforms(1, [0], rng.PRM, 1, 4))
    assert not np.array_equal(base, rng.uniforms(2, [0], rng.PRM, 0, 4))


def test_per_path_counters_match_scalar_counters():
    paths = np.arange(6)
    counters = np.array([0, 5, 2, 2**40, 9, 1])
    joint = rng.uniforms(4, paths, rng.PRM, counters, 2)
    for p, c in zip(paths, counters):
        assert np.array_equal(joint[p], rng.uniforms(4, [p], rng.PRM, int(c), 2)[0])


def test_normals_are_standard():
    z = rng.normals(5, np.arange(200_000), rng.BROWNIAN, 0, 1)[:, 0]
    assert abs(z.mean()) < 3 / np.sqrt(z.size)
    assert stats.kstest(z, "norm").pvalue > 0.01


def test_uniforms_pass_ks():
    u = rng.uniforms(9, np.arange(100_000), rng.AUX, 3, 1)[:, 0]
    assert stats.kstest(u, "uniform").pvalue > 0.01


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**64 - 1), st.integers(0, 2**31))
def test_derive_seed_is_deterministic_and_label_sensitive(seed, label):
    a = rng.derive_seed(seed, label)
    assert a == rng.derive_seed(seed, label)
    assert a != rng.derive_seed(seed, label + 1)
    assert 0 <= a < 2**64


def test_path_stream_advances():
    s = rng.PathStream(1, 2)
    a = s.uniforms(2)
    b = s.uniforms(2)
    assert not np.array_equal(a, b)
    again = rng.PathStream(1, 2)
    assert np.array_equal(again.uniforms(2), a)
