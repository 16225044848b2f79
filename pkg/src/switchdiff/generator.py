"""The operator L, the Dynkin residual, and the short-time switching probe.

    Lf(phi, i) = grad f . b + 1/2 tr(hess f  sigma sigma^T)
                 + sum_{j != i} q_ij(phi) [f(phi(0), j) - f(phi(0), i)]

Test functions are vectorised: ``value(x, i)`` maps (N, n), (N,) to (N,),
``gradient`` to (N, n) and ``hessian`` to (N, n, n).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import DomainError, KernelInconsistencyError
from .history import Segment, segment_from_function
from .model import sparse_row
from .integrator import COMPLETED, SimConfig, run_batch
from .rng import derive_seed
from .stats import McEstimate, chunk_for, estimate, simulate_values


@dataclass(frozen=True)
class TestFunction:
    value: Callable
    gradient: Callable
    hessian: Callable
    bound: float
    name: str = "f"

    __test__ = False  # not a pytest class

    def __call__(self, x, i):
        return self.value(x, i)


def check_derivatives(f: TestFunction, points, regimes, rel_tol: float = 1e-4) -> dict:
    """Compare analytic gradient/hessian with central differences at sample points."""
    x = np.atleast_2d(np.asarray(points, dtype=np.float64))
    N, n = x.shape
    worst_g = worst_h = 0.0
    for i in regimes:
        ia = np.full(N, int(i))
        g = np.asarray(f.gradient(x, ia), dtype=np.float64)
        H = np.asarray(f.hessian(x, ia), dtype=np.float64)
        for k in range(n):
            h = 1e-4 * (1.0 + np.abs(x[:, k]))
            e = np.zeros(n)
            e[k] = 1.0
            xp = x + h[:, None] * e
            xm = x - h[:, None] * e
            fd_g = (f.value(xp, ia) - f.value(xm, ia)) / (2 * h)
            fd_H = (f.gradient(xp, ia) - f.gradient(xm, ia)) / (2 * h)[:, None]
            worst_g = max(worst_g, float(np.max(np.abs(fd_g - g[:, k]) / np.maximum(1.0, np.abs(g[:, k])))))
            worst_h = max(worst_h, float(np.max(np.abs(fd_H - H[:, :, k]) / np.maximum(1.0, np.abs(H[:, :, k])))))
    return {"gradient_error": worst_g, "hessian_error": worst_h,
            "passed": worst_g <= rel_tol and worst_h <= rel_tol}


def jump_term(f: TestFunction, model, seg: Segment, i, j_max: int | None = None):
    """sum_j q_ij [f(x, j) - f(x, i)] and the bound 2 |f| (q_i - partial sum) on what was left out."""
    i = np.asarray(i, dtype=np.int64)
    x = seg.current
    fi = np.asarray(f.value(x, i), dtype=np.float64)
    out = np.zeros(i.shape)
    if model.row is not None:
        J, Q = sparse_row(model, seg, i)
        for k in range(J.shape[1]):
            nz = Q[:, k] != 0
            if nz.any():
                fj = np.asarray(f.value(x[nz], J[nz, k]), dtype=np.float64)
                out[nz] += Q[nz, k] * (fj - fi[nz])
        return out, np.zeros(i.shape)
    total = np.asarray(model.total_intensity(seg, i), dtype=np.float64)
    cum = np.zeros(i.shape)
    tol = model.tail_tolerance
    live = np.flatnonzero(total > tol)
    j_max = model.j_max if j_max is None else j_max
    j = 0
    while live.size and j < j_max:
        j += 1
        sub_i = i[live]
        q = np.asarray(model.intensity(seg.take(live), sub_i, np.full(live.size, j)), dtype=np.float64)
        q = np.where(sub_i == j, 0.0, q)
        nz = q != 0
        if nz.any():
            rows = live[nz]
            fj = np.asarray(f.value(x[rows], np.full(int(nz.sum()), j)), dtype=np.float64)
            out[rows] += q[nz] * (fj - fi[rows])
        cum[live] += q
        live = live[cum[live] < total[live] - tol]
    remainder = 2.0 * f.bound * np.maximum(total - cum, 0.0)
    return out, remainder


def generator_batch(f: TestFunction, model, seg: Segment, i, j_max=None, coef_regime=None):
    """Lf on a batch of segments; returns (values, remainder bounds)."""
    i = np.asarray(i, dtype=np.int64)
    x = seg.current
    ci = i if coef_regime is None else coef_regime
    b = model.drift(x, ci)
    sig = model.diffusion(x, ci)
    g = np.asarray(f.gradient(x, i), dtype=np.float64)
    H = np.asarray(f.hessian(x, i), dtype=np.float64)
    first = (g * b).sum(axis=1)
    A = np.einsum("nak,nbk->nab", sig, sig)
    second = 0.5 * (H * A).sum(axis=(1, 2))
    jumps, rem = jump_term(f, model, seg, i, j_max)
    return first + second + jumps, rem


@dataclass(frozen=True)
class GeneratorValue:
    value: float
    drift_term: float
    diffusion_term: float
    jump_term: float
    remainder_bound: float

    def __float__(self):
        return self.value


def apply_generator(f: TestFunction, model, phi: Segment, i: int, j_max: int | None = None) -> GeneratorValue:
    seg = phi.as_batch()
    ia = np.array([int(i)])
    x = seg.current
    b = model.drift(x, ia)
    sig = model.diffusion(x, ia)
    g = np.asarray(f.gradient(x, ia), dtype=np.float64)
    H = np.asarray(f.hessian(x, ia), dtype=np.float64)
    first = float((g * b).sum())
    A = sig[0] @ sig[0].T
    second = float(0.5 * np.trace(H[0] @ A))
    jt, rem = jump_term(f, model, seg, ia, j_max)
    if not np.isfinite(rem[0]):
        raise KernelInconsistencyError("jump series remainder is unbounded")
    return GeneratorValue(first + second + float(jt[0]), first, second, float(jt[0]), float(rem[0]))


def dynkin_values(f: TestFunction, model, phi0: Segment, i0: int, cfg: SimConfig, N: int, workers: int = 1):
    """Per-path f(X_T, a_T) - f(x0, i0) - int_0^T Lf ds; NaN for exploded paths."""
    x0 = phi0.current.reshape(1, -1)
    f0 = float(f.value(x0, np.array([i0]))[0])

    def integrand(seg, reg):
        return generator_batch(f, model, seg, reg)[0]

    def functional(paths, seed):
        res = run_batch(model, phi0, i0, cfg, paths, "hybrid", {"Lf": integrand}, track=1)
        fT = np.asarray(f.value(res.final_state, res.final_regime), dtype=np.float64)
        val = fT - f0 - res.integrals["Lf"]
        return np.stack([np.where(res.completed, val, np.nan), np.where(res.completed, fT, np.nan)], axis=1)

    return simulate_values(functional, N, cfg.master_seed, chunk_for(phi0.length, phi0.dim_n), workers)


def dynkin_residual(f: TestFunction, model, phi0: Segment, i0: int, cfg: SimConfig, N: int, workers: int = 1) -> McEstimate:
    if N < 2:
        raise DomainError("N must be at least 2")
    vals = dynkin_values(f, model, phi0, i0, cfg, N, workers)
    return estimate(vals[:, 0], cfg.master_seed)


def dynkin_check(f: TestFunction, model, initial, i0: int, cfg: SimConfig, N: int, workers: int = 1) -> dict:
    """Residual at dt and dt/2 (independent seeds) with the budget 3 SE + 2 |r(dt) - r(dt/2)|.

    ``initial`` is a function of the lag (or a constant) so the initial
    segment can be sampled on both grids.
    """
    fn = initial if callable(initial) else (lambda t, v=np.atleast_1d(initial): v)
    out = {}
    for label, dt, seed in (("dt", cfg.dt, cfg.master_seed), ("half", cfg.dt / 2, derive_seed(cfg.master_seed, 2, 6))):
        c = replace(cfg, dt=dt, master_seed=seed)
        phi0 = segment_from_function(fn, model.delay_r, dt)
        vals = dynkin_values(f, model, phi0, i0, c, N, workers)
        out[label] = {"residual": estimate(vals[:, 0], seed), "terminal": estimate(vals[:, 1], seed)}
    r1, r2 = out["dt"]["residual"], out["half"]["residual"]
    budget = 3 * r1.se + 2 * abs(r1.mean - r2.mean)
    return {
        "residual": r1, "residual_half": r2, "terminal": out["dt"]["terminal"],
        "bias_budget": 2 * abs(r1.mean - r2.mean), "threshold": budget,
        "passed": abs(r1.mean) <= budget,
    }


# ---------------------------------------------------------------- short-time law

@dataclass
class ProbeRow:
    delta: float
    estimate: float
    se: float
    target: float
    z: float
    diag_estimate: float
    diag_se: float
    diag_target: float
    diag_z: float


def intensity_probe(model, phi: Segment, i: int, j: int, deltas, N: int, master_seed: int = 0, workers: int = 1) -> dict:
    """P{a(delta) = j}/delta and (1 - P{a(delta) = i})/delta from (phi, i).

    Each delta must be a multiple of the segment's grid spacing and gets its
    own seed.  Targets are q_ij(phi) and q_i(phi).
    """
    if i == j:
        raise DomainError("target regime must differ from the start")
    dt = phi.grid_dt
    seg = phi.as_batch()
    target = float(model.intensity(seg, np.array([i]), np.array([j]))[0])
    diag_target = float(model.total_intensity(seg, np.array([i]))[0])
    rows = []
    for k, delta in enumerate(deltas):
        steps = delta / dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise DomainError(f"delta {delta} is not a multiple of the grid spacing {dt}")
        seed = derive_seed(master_seed, 9, k)
        cfg = SimConfig(dt=dt, horizon_T=delta, master_seed=seed)

        def functional(paths, s, cfg=cfg):
            res = run_batch(model, phi, i, cfg, paths, "hybrid", track=1)
            ok = res.status == COMPLETED
            return np.stack([
                np.where(ok, (res.final_regime == j).astype(float), np.nan),
                np.where(ok, (res.final_regime != i).astype(float), np.nan),
            ], axis=1)

        vals = simulate_values(functional, N, seed, chunk_for(phi.length, phi.dim_n), workers)
        rows.append(_row(delta, vals, target, diag_target))
    richardson = []
    for a, b in zip(rows, rows[1:]):
        comb = math.sqrt(a.se ** 2 + b.se ** 2)
        slack = diag_target ** 2 * max(a.delta, b.delta)
        richardson.append({
            "deltas": [a.delta, b.delta], "difference": abs(a.estimate - b.estimate),
            "threshold": 3 * comb + slack, "passed": abs(a.estimate - b.estimate) < 3 * comb + slack,
        })
    return {"rows": rows, "target": target, "diag_target": diag_target, "richardson": richardson}


def _row(delta, vals, target, diag_target):
    hit = vals[:, 0][~np.isnan(vals[:, 0])]
    left = vals[:, 1][~np.isnan(vals[:, 1])]
    p, q = hit.mean(), left.mean()
    se = math.sqrt(max(p * (1 - p), 0.0) / hit.size) / delta
    dse = math.sqrt(max(q * (1 - q), 0.0) / left.size) / delta
    est, dest = p / delta, q / delta
    z = (est - target) / se if se > 0 else (0.0 if est == target else math.inf)
    dz = (dest - diag_target) / dse if dse > 0 else (0.0 if dest == diag_target else math.inf)
    return ProbeRow(delta, est, se, target, z, dest, dse, diag_target, dz)
