"""Hybrid model declaration, the interval partition of the mark space, and spot checks.

Coefficient and kernel callables are vectorised over a batch of paths:

* ``drift(x, i)``: x of shape (N, n), i of shape (N,) -> (N, n)
* ``diffusion(x, i)`` -> (N, n, d)
* ``intensity(seg, i, j)``: batched Segment, integer arrays -> (N,) rates q_ij
* ``total_intensity(seg, i)`` -> (N,) exit rates q_i = sum_{j != i} q_ij
* optional ``row(seg, i)`` -> (J, Q), both (N, K): candidate targets in
  ascending order per path and their rates q_ij.  q_ij must vanish for every
  j outside J; entries with J < 1 or J == i are ignored.  Without it,
  targets are enumerated j = 1, 2, ... up to ``j_max``.

Regimes are positive integers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .errors import DomainError, KernelInconsistencyError, ParameterError
from .history import Segment


@dataclass(frozen=True)
class GlobalBound:
    """sup over all segments and regimes of q_i is at most M."""

    M: float

    def __post_init__(self):
        if not self.M > 0:
            raise ParameterError(f"bound M must be positive, got {self.M}")

    def rate(self, level):
        return np.full(np.shape(level), float(self.M))


@dataclass(frozen=True)
class LocalBound:
    """q_i(phi) <= bound_fn(H) whenever sup_norm(phi) <= H."""

    bound_fn: Callable[[np.ndarray], np.ndarray]
    margin: float = 1.0

    def rate(self, level):
        rate = np.asarray(self.bound_fn(np.asarray(level, dtype=np.float64)), dtype=np.float64)
        return np.broadcast_to(rate, np.shape(level)).copy()


BoundSpec = Union[GlobalBound, LocalBound]


@dataclass(frozen=True)
class HybridModel:
    dim_n: int
    dim_d: int
    delay_r: float
    drift: Callable
    diffusion: Callable
    intensity: Callable
    total_intensity: Callable
    bound: BoundSpec
    tail_tolerance: float = 1e-12
    j_max: int = 10_000
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)
    row: Callable | None = None

    def __post_init__(self):
        if self.dim_n < 1 or self.dim_d < 1:
            raise ParameterError("dimensions must be positive")
        if self.delay_r < 0:
            raise ParameterError("delay must be nonnegative")

    def coefficients(self, x, i):
        return self.drift(x, i), self.diffusion(x, i)


def _check_regime(i):
    if int(i) != i or i < 1:
        raise DomainError(f"regimes are positive integers, got {i}")
    return int(i)


def delta_intervals(model: HybridModel, phi: Segment, i, mass_cap=None):
    """Consecutive half-open intervals [lo, hi) of lengths q_ij(phi), j ascending, j != i.

    Zero-length intervals are omitted.  Enumeration stops once the partial
    sum reaches q_i(phi) - tail_tolerance.
    """
    i = _check_regime(i)
    seg = phi.as_batch()
    ia = np.array([i])
    total = float(model.total_intensity(seg, ia)[0])
    if mass_cap is not None and mass_cap < total - model.tail_tolerance:
        raise DomainError(f"mass cap {mass_cap} below total intensity {total}")
    out = []
    cum = 0.0
    if total <= model.tail_tolerance:
        return out
    for j in range(1, model.j_max + 1):
        if j == i:
            continue
        q = float(model.intensity(seg, ia, np.array([j]))[0])
        if q > 0.0:
            out.append((j, (cum, cum + q)))
            cum += q
        if cum >= total - model.tail_tolerance:
            return out
    raise KernelInconsistencyError(
        f"partial sums from regime {i} reach {cum!r}, total is {total!r} (j_max={model.j_max})"
    )


def jump_map_h(model: HybridModel, phi: Segment, i, z) -> int:
    """Displacement j - i of the interval containing z, or 0 when z misses them all."""
    if z < 0:
        raise DomainError("mark must be nonnegative")
    i = _check_regime(i)
    j = jump_targets(model, phi.as_batch(), np.array([i]), np.array([float(z)]))[0]
    return int(j) - i if j else 0


def sparse_row(model: HybridModel, seg: Segment, i):
    """(J, Q) from the model's row declaration, with invalid entries zeroed."""
    J, Q = model.row(seg, i)
    J = np.asarray(J, dtype=np.int64).reshape(len(i), -1)
    Q = np.asarray(Q, dtype=np.float64).reshape(len(i), -1)
    bad = (J < 1) | (J == np.asarray(i)[:, None])
    return J, np.where(bad, 0.0, Q)


def jump_targets(model: HybridModel, seg: Segment, i, z, total=None) -> np.ndarray:
    """Vectorised interval lookup: target regime for each mark, 0 for no switch.

    Walks targets in ascending order for all paths at once; a path leaves
    the walk when its cumulative sum passes its mark (hit) or reaches its
    total (miss).
    """
    i = np.asarray(i, dtype=np.int64)
    z = np.asarray(z, dtype=np.float64)
    if total is None:
        total = np.asarray(model.total_intensity(seg, i), dtype=np.float64)
    out = np.zeros(i.shape, dtype=np.int64)
    live = np.flatnonzero(z < total)
    if live.size == 0:
        return out
    tol = model.tail_tolerance
    if model.row is not None:
        J, Q = sparse_row(model, seg.take(live), i[live])
        cum = np.cumsum(Q, axis=1)
        inside = (z[live][:, None] < cum) & (Q > 0)
        found = inside.any(axis=1)
        first = np.argmax(inside, axis=1)
        out[live[found]] = J[found, first[found]]
        short = ~found & (cum[:, -1] < total[live] - tol)
        if short.any():
            raise KernelInconsistencyError("declared row does not reach the total intensity")
        return out
    cum = np.zeros(live.size)
    j = 0
    while live.size:
        j += 1
        if j > model.j_max:
            raise KernelInconsistencyError(
                f"partial sums stop short of totals after j_max={model.j_max}"
            )
        sub_i = i[live]
        q = np.asarray(model.intensity(seg.take(live), sub_i, np.full(live.size, j)), dtype=np.float64)
        q = np.where(sub_i == j, 0.0, np.maximum(q, 0.0))
        cum = cum + q
        hit = z[live] < cum
        out[live[hit]] = j
        keep = ~hit & (cum < total[live] - tol)
        live = live[keep]
        cum = cum[keep]
    return out


@dataclass
class ValidationReport:
    rows: list
    passed: bool
    lipschitz_estimates: dict

    def failures(self):
        return [r for r in self.rows if _failed(r)]


def _failed(row):
    return bool(
        row["bound_violation"] or row["negative"] or row["tail_residual_violation"] or row["row_mismatch"]
    )


def validate_model(model: HybridModel, sample_segments, regimes) -> ValidationReport:
    """Spot-check kernel sign, mass accounting, and the declared bound on samples."""
    if not sample_segments or not regimes:
        raise DomainError("need at least one sample segment and one regime")
    rows = []
    for s_idx, seg in enumerate(sample_segments):
        bseg = seg.as_batch()
        sup = float(bseg.sup_norm()[0])
        for i in regimes:
            i = _check_regime(i)
            ia = np.array([i])
            total = float(model.total_intensity(bseg, ia)[0])
            cum = 0.0
            negative = []
            outside = []
            declared = {}
            if model.row is not None:
                J, Q = sparse_row(model, bseg, ia)
                declared = {int(a): float(b) for a, b in zip(J[0], Q[0]) if b != 0}
            for j in range(1, model.j_max + 1):
                if j == i:
                    continue
                q = float(model.intensity(bseg, ia, np.array([j]))[0])
                if q < 0:
                    negative.append(j)
                if model.row is not None and abs(q - declared.get(j, 0.0)) > 1e-12 * max(1.0, abs(q)):
                    outside.append(j)
                cum += q
                if abs(total - cum) <= model.tail_tolerance:
                    break
            if isinstance(model.bound, GlobalBound):
                limit = model.bound.M
            else:
                limit = float(model.bound.rate(np.array([sup]))[0])
            residual = total - cum
            rows.append(
                {
                    "sample": s_idx,
                    "regime": i,
                    "total_intensity": total,
                    "bound": limit,
                    "bound_violation": bool(total > limit * (1 + 1e-12)),
                    "tail_residual": residual,
                    "tail_residual_violation": bool(abs(residual) > model.tail_tolerance),
                    "negative": negative,
                    "row_mismatch": outside,
                }
            )
    lip = _lipschitz_spot(model, sample_segments, regimes)
    passed = not any(_failed(r) for r in rows)
    return ValidationReport(rows, passed, lip)


def _lipschitz_spot(model, segments, regimes):
    """Finite-difference slopes of b and sigma between sampled current values (informational)."""
    xs = np.stack([np.asarray(s.current, dtype=np.float64).reshape(-1) for s in segments])
    out = {}
    if len(xs) < 2:
        return out
    for i in regimes:
        ia = np.full(len(xs), int(i))
        b = model.drift(xs, ia).reshape(len(xs), -1)
        sg = model.diffusion(xs, ia).reshape(len(xs), -1)
        best_b = best_s = 0.0
        for a in range(len(xs)):
            dx = np.linalg.norm(xs[a] - xs[a + 1:], axis=1)
            ok = dx > 0
            if ok.any():
                best_b = max(best_b, float(np.max(np.linalg.norm(b[a] - b[a + 1:], axis=1)[ok] / dx[ok])))
                best_s = max(best_s, float(np.max(np.linalg.norm(sg[a] - sg[a + 1:], axis=1)[ok] / dx[ok])))
        out[int(i)] = {"drift": best_b, "diffusion": best_s}
    return out


def constant_kernel(rates: dict):
    """Past-independent kernel from a table {(i, j): q_ij}; unlisted pairs are 0."""
    if any(v < 0 for v in rates.values()):
        raise ParameterError("rates must be nonnegative")
    size = max([max(i, j) for i, j in rates] + [1]) + 1
    table = np.zeros((size, size))
    for (i, j), q in rates.items():
        if i == j:
            raise ParameterError("diagonal rates are not part of the kernel")
        table[i, j] = q
    totals = table.sum(axis=1)

    def intensity(seg, i, j):
        i = np.asarray(i)
        j = np.asarray(j)
        inside = (i < size) & (j < size)
        return np.where(inside, table[np.minimum(i, size - 1), np.minimum(j, size - 1)], 0.0)

    def total_intensity(seg, i):
        i = np.asarray(i)
        return np.where(i < size, totals[np.minimum(i, size - 1)], 0.0)

    return intensity, total_intensity


def linear_apply(x, K):
    """K @ x for each row of x, summed in a fixed order so every path's value
    is independent of the batch it is evaluated in."""
    out = np.zeros((x.shape[0], K.shape[0]))
    for a in range(K.shape[0]):
        acc = K[a, 0] * x[:, 0]
        for c in range(1, K.shape[1]):
            acc = acc + K[a, c] * x[:, c]
        out[:, a] = acc
    return out


def constant_coefficients(drift_matrix, diffusion_matrix):
    """Linear drift b(x, i) = A x and additive diffusion, the same in every regime."""
    A = np.atleast_2d(np.asarray(drift_matrix, dtype=np.float64))
    S = np.atleast_2d(np.asarray(diffusion_matrix, dtype=np.float64))

    def drift(x, i):
        return linear_apply(x, A)

    def diffusion(x, i):
        return np.broadcast_to(S, (x.shape[0],) + S.shape)

    return drift, diffusion
