"""Monte Carlo reductions and the empirical continuity probes."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
import multiprocessing

import numpy as np
from scipy.stats import norm

from .errors import DegenerateEstimateError, DomainError


@dataclass(frozen=True)
class McEstimate:
    mean: float
    se: float
    n: int
    excluded: int
    seed: int

    def to_dict(self):
        return {"mean": self.mean, "se": self.se, "n": self.n, "excluded": self.excluded, "seed": self.seed}


def estimate(values, seed: int = 0) -> McEstimate:
    """Mean and standard error over the finite entries; NaN marks an excluded path."""
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    n = v.size
    keep = v[~np.isnan(v)]
    if keep.size == 0:
        raise DegenerateEstimateError(f"all {n} samples were excluded")
    mean = float(keep.mean())
    se = float(keep.std(ddof=1) / math.sqrt(keep.size)) if keep.size > 1 else float("nan")
    return McEstimate(mean, se, n, n - keep.size, int(seed))


def default_workers() -> int:
    env = os.environ.get("SWITCHDIFF_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


_FUNCTIONAL = None


def _run_chunk(args):
    lo, hi, seed = args
    return np.asarray(_FUNCTIONAL(np.arange(lo, hi, dtype=np.int64), seed), dtype=np.float64)


def simulate_values(path_functional, N: int, master_seed: int, chunk_size: int = 20_000, workers: int = 1):
    """Evaluate ``path_functional(path_indices, seed)`` over paths 0..N-1 in chunks.

    The functional returns one value (or one row of values) per path.  Chunks
    are concatenated in path order, so the output does not depend on the
    chunk size or the number of workers as long as the functional is
    path-wise deterministic.
    """
    global _FUNCTIONAL
    if N < 1:
        raise DomainError("N must be positive")
    bounds = [(lo, min(lo + chunk_size, N), master_seed) for lo in range(0, N, chunk_size)]
    if workers > 1 and len(bounds) > 1:
        _FUNCTIONAL = path_functional
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            parts = list(pool.map(_run_chunk, bounds))
        _FUNCTIONAL = None
    else:
        parts = [np.asarray(path_functional(np.arange(lo, hi, dtype=np.int64), s), dtype=np.float64)
                 for lo, hi, s in bounds]
    return np.concatenate(parts, axis=0)


def monte_carlo(path_functional, N: int, master_seed: int, chunk_size: int = 20_000, workers: int = 1) -> McEstimate:
    if N < 2:
        raise DomainError("N must be at least 2")
    values = simulate_values(path_functional, N, master_seed, chunk_size, workers)
    return estimate(values, master_seed)


def chunk_for(length: int, dim_n: int = 1, budget_bytes: int = 200_000_000) -> int:
    """Chunk size keeping the history buffers of a chunk within a memory budget."""
    per_path = 2 * length * dim_n * 8 * 4
    return int(max(1000, min(50_000, budget_bytes // per_path)))


# ---------------------------------------------------------------- continuity probes

@dataclass
class ProbeRow:
    radius: float
    difference: float
    se: float
    value: float
    value_se: float


def _perturbations(phi0, delta, family):
    from .history import Segment
    lags = phi0.lags()
    if family == "shift":
        prof = np.ones_like(lags)
    elif family == "sine":
        r = phi0.delay_r
        prof = np.sin(np.pi * (lags + r) / r) if r > 0 else np.ones_like(lags)
    else:
        raise DomainError(f"unknown perturbation family {family!r}")
    vals = phi0.values.copy()
    vals[:, 0] += delta * prof
    return Segment(vals, phi0.grid_dt, phi0.delay_r, phi0.adjusted)


def feller_probe(model, f, phi0, i0, radii, cfg, N, family="shift", chunk_size=None, workers=1):
    """Paired (common random numbers) estimates of u_f(phi0 + delta h) - u_f(phi0).

    ``f(final_segment, final_regime) -> (N,)``.  The standard error of each
    difference comes from the paired differences themselves.
    """
    from .integrator import run_batch

    radii = [float(r) for r in radii]
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise DomainError("radii must be strictly decreasing")
    chunk = chunk_size or chunk_for(phi0.length, phi0.dim_n)
    # a delta = 0 perturbation is simulated as a separate run, not reused
    segs = [phi0, _perturbations(phi0, 0.0, family)] + [_perturbations(phi0, r, family) for r in radii]

    def functional(paths, seed):
        c = cfg if seed == cfg.master_seed else _with_seed(cfg, seed)
        cols = []
        for seg in segs:
            res = run_batch(model, seg, i0, c, paths, "hybrid", track=1)
            val = np.asarray(f(res.final_segment, res.final_regime), dtype=np.float64)
            cols.append(np.where(res.completed, val, np.nan))
        return np.stack(cols, axis=1)

    vals = simulate_values(functional, N, cfg.master_seed, chunk, workers)
    base = vals[:, 0]
    rows = []
    for k, r in enumerate(radii, start=2):
        diff = vals[:, k] - base
        e = estimate(diff, cfg.master_seed)
        v = estimate(vals[:, k], cfg.master_seed)
        rows.append(ProbeRow(r, abs(e.mean), e.se, v.mean, v.se))
    zero_paths = vals[:, 1] - base
    zero = float(np.max(np.abs(zero_paths[~np.isnan(zero_paths)]), initial=0.0))
    return {
        "rows": rows,
        "zero_difference": zero,
        "base": estimate(base, cfg.master_seed),
        "consistent_with_continuity": _soft_verdict(rows),
        "non_increasing": _non_increasing(rows),
    }


def _non_increasing(rows):
    return all(
        b.difference <= a.difference + 3 * math.sqrt(a.se ** 2 + b.se ** 2)
        for a, b in zip(rows, rows[1:])
    )


def _soft_verdict(rows):
    if len(rows) < 2:
        return True
    a, b = rows[-2], rows[-1]
    return bool(b.difference <= a.difference + 3 * math.sqrt(a.se ** 2 + b.se ** 2))


def _with_seed(cfg, seed):
    from dataclasses import replace
    return replace(cfg, master_seed=int(seed))


def strong_feller_probe(model, g, x0, i0, radii, cfg, N, seeds=None, direction=None, workers=1):
    """Independent-seed estimates of E g(X_T, a_T) from x0 + delta e and x0.

    ``g(x_final (N, n), regime (N,)) -> (N,)``; the model must carry no memory.
    Returns differences (signed, perturbed minus base) with combined SE from
    the independent runs.
    """
    from .history import constant_segment
    from .integrator import run_batch
    from .rng import derive_seed

    if model.delay_r != 0:
        raise DomainError("strong Feller probe needs a model without memory (r = 0)")
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    e = np.zeros_like(x0) if direction is None else np.asarray(direction, dtype=np.float64)
    if direction is None:
        e[0] = 1.0
    points = [0.0] + [float(r) for r in radii]
    seeds = seeds or [derive_seed(cfg.master_seed, 7, k) for k in range(len(points))]
    ests = []
    for delta, seed in zip(points, seeds):
        c = _with_seed(cfg, seed)
        phi = constant_segment(x0 + delta * e, 0.0, cfg.dt)

        def functional(paths, s, phi=phi, c=c):
            res = run_batch(model, phi, i0, c, paths, "hybrid", track=1)
            val = np.asarray(g(res.final_state, res.final_regime), dtype=np.float64)
            return np.where(res.completed, val, np.nan)

        ests.append(estimate(simulate_values(functional, N, seed, 50_000, workers), seed))
    base = ests[0]
    rows = [
        ProbeRow(r, est.mean - base.mean, math.sqrt(est.se ** 2 + base.se ** 2), est.mean, est.se)
        for r, est in zip(points[1:], ests[1:])
    ]
    abs_rows = [ProbeRow(r.radius, abs(r.difference), r.se, r.value, r.value_se) for r in rows]
    return {"rows": rows, "base": base, "consistent_with_continuity": _soft_verdict(abs_rows)}


def gaussian_cdf_difference(delta: float, scale: float = 1.0) -> float:
    return float(norm.cdf(delta / scale) - norm.cdf(0.0))
