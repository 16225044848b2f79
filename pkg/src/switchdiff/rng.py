"""Counter-based random streams.

Every draw is a pure function of ``(master_seed, path_index, tag, counter)``
so that paths can be generated in any order, in any batch size and on any
worker while staying bitwise reproducible.  The generator is Philox4x32-10,
vectorised over arrays of path indices and counters.
"""
from __future__ import annotations

import numpy as np

MASK32 = np.uint64(0xFFFFFFFF)
_MUL0 = np.uint64(0xD2511F53)
_MUL1 = np.uint64(0xCD9E8D57)
_BUMP0 = np.uint64(0x9E3779B9)
_BUMP1 = np.uint64(0xBB67AE85)
_SHIFT = np.uint64(32)
_TWO53 = 9007199254740992.0

# stream tags (upper byte of the second counter word)
BROWNIAN = 1
BRIDGE = 2
PRM = 3
CHAIN = 4
AUX = 5


def philox4x32(c0, c1, c2, c3, k0, k1, rounds=10):
    """Philox4x32 block function on arrays of 32-bit words held in uint64."""
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) for c in (c0, c1, c2, c3))
    k0 = np.uint64(int(k0) & 0xFFFFFFFF)
    k1 = np.uint64(int(k1) & 0xFFFFFFFF)
    for _ in range(rounds):
        p0 = _MUL0 * c0
        p1 = _MUL1 * c2
        c0, c1, c2, c3 = (
            (p1 >> _SHIFT) ^ c1 ^ k0,
            p1 & MASK32,
            (p0 >> _SHIFT) ^ c3 ^ k1,
            p0 & MASK32,
        )
        k0 = (k0 + _BUMP0) & MASK32
        k1 = (k1 + _BUMP1) & MASK32
    return c0, c1, c2, c3


def _blocks(seed, paths, tag, counter, block):
    paths = np.asarray(paths, dtype=np.uint64)
    counter = np.broadcast_to(np.asarray(counter, dtype=np.uint64), paths.shape)
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    w1 = np.uint64((int(tag) << 24) | (int(block) & 0xFFFFFF))
    c1 = np.full(paths.shape, w1, dtype=np.uint64) | ((counter >> _SHIFT) << np.uint64(16))
    return philox4x32(
        counter & MASK32, c1, paths & MASK32, paths >> _SHIFT, seed & 0xFFFFFFFF, seed >> 32
    )


def uniforms(seed, paths, tag, counter, k):
    """Uniform draws on [0, 1) with 53-bit resolution, shape ``(len(paths), k)``.

    ``counter`` may be a scalar (e.g. the step number) or one value per path
    (e.g. each path's own event counter).  It must stay below 2**48.
    """
    paths = np.atleast_1d(np.asarray(paths, dtype=np.uint64))
    out = np.empty((paths.size, k), dtype=np.float64)
    for block in range((k + 1) // 2):
        w0, w1, w2, w3 = _blocks(seed, paths, tag, counter, block)
        a = ((w0 << _SHIFT) | w1) >> np.uint64(11)
        out[:, 2 * block] = a.astype(np.float64) / _TWO53
        if 2 * block + 1 < k:
            b = ((w2 << _SHIFT) | w3) >> np.uint64(11)
            out[:, 2 * block + 1] = b.astype(np.float64) / _TWO53
    return out


def normals(seed, paths, tag, counter, k):
    """Standard normal draws (Box-Muller), shape ``(len(paths), k)``."""
    m = k + (k % 2)
    u = uniforms(seed, paths, tag, counter, m)
    r = np.sqrt(-2.0 * np.log1p(-u[:, 0::2]))
    theta = 2.0 * np.pi * u[:, 1::2]
    z = np.empty_like(u)
    z[:, 0::2] = r * np.cos(theta)
    z[:, 1::2] = r * np.sin(theta)
    return z[:, :k]


def exponentials(u):
    """Map uniforms on [0, 1) to unit-rate exponential variates."""
    return -np.log1p(-u)


def derive_seed(master_seed, *labels):
    """Deterministic child seed from a master seed and integer labels."""
    key = int(master_seed) & 0xFFFFFFFFFFFFFFFF
    words = [int(x) & 0xFFFFFFFF for x in labels] + [0] * 4
    w = philox4x32(
        np.uint64(words[0]), np.uint64(words[1]), np.uint64(words[2]),
        np.uint64(0xC0FFEE), key & 0xFFFFFFFF, key >> 32,
    )
    return (int(w[0]) << 32) | int(w[1])


class PathStream:
    """Sequential view of one tagged stream of a single path.

    Each call consumes one counter value; used by the single-path helpers.
    """

    def __init__(self, master_seed, path_index, tag=AUX, counter=0):
        self.master_seed = int(master_seed)
        self.path_index = int(path_index)
        self.tag = tag
        self.counter = int(counter)

    def uniforms(self, k):
        u = uniforms(self.master_seed, [self.path_index], self.tag, self.counter, k)[0]
        self.counter += 1
        return u

    def normals(self, k):
        z = normals(self.master_seed, [self.path_index], self.tag, self.counter, k)[0]
        self.counter += 1
        return z
