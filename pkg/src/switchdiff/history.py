"""Memory segments X_t(s) = X(t + s), s in [-r, 0], stored on a uniform grid."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericError

_DIVIDES_RTOL = 1e-9


def grid_length(delay_r: float, grid_dt: float) -> tuple[int, float, bool]:
    """Number of stored values, effective delay, and whether r was adjusted."""
    if delay_r < 0:
        raise DomainError(f"delay must be nonnegative, got {delay_r}")
    if not grid_dt > 0:
        raise DomainError(f"grid spacing must be positive, got {grid_dt}")
    if delay_r == 0:
        return 1, 0.0, False
    k = delay_r / grid_dt
    nearest = round(k)
    if abs(k - nearest) <= _DIVIDES_RTOL * max(1.0, k):
        return int(nearest) + 1, float(delay_r), False
    m = math.floor(k)
    return m + 1, m * grid_dt, True


@dataclass
class Segment:
    """Sampled segment function on [-delay_r, 0].

    ``values`` has shape ``(L, n)`` for a single path or ``(N, L, n)`` for a
    batch of paths sharing one grid; the last row along the lag axis is the
    value at lag 0.
    """

    values: np.ndarray
    grid_dt: float
    delay_r: float
    adjusted: bool = field(default=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim not in (2, 3):
            raise DomainError("segment values must have shape (L, n) or (N, L, n)")
        expected, _, _ = grid_length(self.delay_r, self.grid_dt)
        if self.length != expected:
            raise DomainError(
                f"segment holds {self.length} values, grid needs {expected}"
            )

    @property
    def batched(self) -> bool:
        return self.values.ndim == 3

    @property
    def length(self) -> int:
        return self.values.shape[-2]

    @property
    def dim_n(self) -> int:
        return self.values.shape[-1]

    @property
    def current(self) -> np.ndarray:
        """Value at lag 0 (exactly the last stored entry)."""
        return self.values[..., -1, :]

    def lags(self) -> np.ndarray:
        return (np.arange(self.length) - (self.length - 1)) * self.grid_dt

    def at(self, lag: float) -> np.ndarray:
        """Linear interpolation at ``lag`` in [-r, 0]; exact on grid points."""
        slack = 1e-12 * max(1.0, self.delay_r)
        if not (-self.delay_r - slack <= lag <= 0.0):
            raise DomainError(f"lag {lag} outside [-{self.delay_r}, 0]")
        if lag == 0.0 or self.length == 1:
            return self.current.copy()
        pos = (self.length - 1) + lag / self.grid_dt
        pos = min(max(pos, 0.0), self.length - 1.0)
        lo = int(math.floor(pos))
        if lo >= self.length - 1:
            return self.current.copy()
        w = pos - lo
        v = self.values
        if w == 0.0:
            return v[..., lo, :].copy()
        return (1.0 - w) * v[..., lo, :] + w * v[..., lo + 1, :]

    def sup_norm(self):
        """Max Euclidean norm over grid values (array of shape (N,) if batched)."""
        return np.sqrt((self.values * self.values).sum(axis=-1)).max(axis=-1)

    def push(self, new_value) -> "Segment":
        """Drop the oldest value and append ``new_value`` at lag 0."""
        new_value = np.asarray(new_value, dtype=np.float64)
        if not np.all(np.isfinite(new_value)):
            raise NumericError("cannot push a non-finite value into a segment")
        shifted = np.concatenate(
            [self.values[..., 1:, :], np.broadcast_to(new_value, self.current.shape)[..., None, :]],
            axis=-2,
        )
        return Segment(shifted, self.grid_dt, self.delay_r, self.adjusted)

    def take(self, idx) -> "Segment":
        """Sub-batch of paths."""
        return Segment(self.values[idx], self.grid_dt, self.delay_r, self.adjusted)

    def as_batch(self) -> "Segment":
        if self.batched:
            return self
        return Segment(self.values[None], self.grid_dt, self.delay_r, self.adjusted)

    def integrate(self, weights=None) -> np.ndarray:
        """Trapezoid integral over [-r, 0] of ``weights(lag) * segment``, per component.

        Returns 0 when r = 0.
        """
        if self.length == 1:
            return np.zeros(self.values.shape[:-2] + (self.dim_n,))
        w = np.full(self.length, self.grid_dt)
        w[0] *= 0.5
        w[-1] *= 0.5
        if weights is not None:
            w = w * np.asarray(weights, dtype=np.float64)
        return (w[:, None] * self.values).sum(axis=-2)


def trapezoid_weights(seg: Segment, weight_fn=None) -> np.ndarray:
    """Quadrature weights on the segment grid, optionally times ``weight_fn(lags)``."""
    if seg.length == 1:
        return np.zeros(1)
    w = np.full(seg.length, seg.grid_dt)
    w[0] *= 0.5
    w[-1] *= 0.5
    if weight_fn is not None:
        w = w * np.broadcast_to(np.asarray(weight_fn(seg.lags()), dtype=np.float64), w.shape)
    return w


def segment_from_function(initial_fn, r: float, grid_dt: float) -> Segment:
    """Sample ``initial_fn`` on the grid of [-r, 0].

    When grid_dt does not divide r the grid keeps floor(r/grid_dt) intervals
    and r shrinks accordingly; ``adjusted`` records this.
    """
    length, r_eff, adjusted = grid_length(r, grid_dt)
    lags = (np.arange(length) - (length - 1)) * grid_dt
    rows = [np.atleast_1d(np.asarray(initial_fn(float(t)), dtype=np.float64)) for t in lags]
    values = np.stack(rows)
    if not np.all(np.isfinite(values)):
        raise NumericError("initial function produced non-finite values")
    return Segment(values, grid_dt, r_eff, adjusted)


def constant_segment(value, r: float, grid_dt: float) -> Segment:
    v = np.atleast_1d(np.asarray(value, dtype=np.float64))
    return segment_from_function(lambda t: v, r, grid_dt)


class SegmentRing:
    """Batched circular history buffer with O(1) push.

    Every value is written twice (positions p and p + L) so the window of the
    most recent L values is always the contiguous slice ``buf[:, h:h+L]``.
    """

    def __init__(self, initial: Segment, n_paths: int):
        self.grid_dt = initial.grid_dt
        self.delay_r = initial.delay_r
        self.adjusted = initial.adjusted
        L = initial.length
        self.length = L
        vals = initial.values
        if vals.ndim == 2:
            vals = np.broadcast_to(vals, (n_paths,) + vals.shape)
        self.buf = np.empty((n_paths, 2 * L, initial.dim_n))
        self.buf[:, :L] = vals
        self.buf[:, L:] = vals
        self.head = 0

    def window(self) -> np.ndarray:
        return self.buf[:, self.head:self.head + self.length]

    def segment(self, idx=None) -> Segment:
        w = self.window() if idx is None else self.window()[idx]
        return Segment(w, self.grid_dt, self.delay_r, self.adjusted)

    def current(self) -> np.ndarray:
        return self.buf[:, self.head + self.length - 1]

    def push(self, x: np.ndarray):
        h, L = self.head, self.length
        if L == 1:
            self.buf[:, 0] = x
            self.buf[:, 1] = x
            return
        self.buf[:, h + L] = x
        self.buf[:, h] = x
        self.head = (h + 1) % L

    def tentative(self, idx, xs: np.ndarray, frac) -> Segment:
        """Segment at an off-grid time t_k + frac*dt for the paths ``idx``.

        Grid values are linearly interpolated onto the shifted grid and the
        lag-0 entry is the partial-step state ``xs``.
        """
        w = self.window()[idx]
        if self.length == 1:
            vals = xs[:, None, :].copy()
        else:
            f = np.asarray(frac, dtype=np.float64).reshape(-1, 1, 1)
            vals = np.empty_like(w)
            vals[:, :-1] = (1.0 - f) * w[:, :-1] + f * w[:, 1:]
            vals[:, -1] = xs
        return Segment(vals, self.grid_dt, self.delay_r, self.adjusted)
