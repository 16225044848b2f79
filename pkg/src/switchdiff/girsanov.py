"""Both sides of the change-of-measure identity between the past-dependent
switching process and the Markov-modulated reference process.

For a jump pattern i_0 -> i_1 -> ... -> i_l with exactly l jumps on [0, T]:

    E[f(X_T, a_T); pattern] = e^T E[f(Z_T, i_l); pattern of g]
                                * prod_k q_{i_(k-1) i_k}(Z at tau_k) / rho_{i_(k-1) i_k}
                                * exp(-int_0^T q_{g(s)}(Z_s) ds)]

Each product factor pairs the regime before the k-th jump with the regime
after it and evaluates the intensity on the segment at that jump.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, NumericError
from .integrator import COMPLETED, EXPLODED, SimConfig, Trajectory, run_batch
from .rng import derive_seed
from .stats import McEstimate, chunk_for, estimate, simulate_values


@dataclass(frozen=True)
class JumpPattern:
    i0: int
    targets: tuple = ()

    def __post_init__(self):
        t = tuple(int(x) for x in self.targets)
        object.__setattr__(self, "targets", t)
        if self.i0 < 1 or any(x < 1 for x in t):
            raise DomainError("regimes are positive integers")
        seq = (self.i0,) + t
        for a, b in zip(seq, seq[1:]):
            if a == b:
                raise DomainError(f"pattern repeats regime {a} on consecutive jumps")

    @property
    def l(self) -> int:
        return len(self.targets)

    @property
    def final(self) -> int:
        return self.targets[-1] if self.targets else self.i0

    def matches(self, n_jumps, jump_targets) -> np.ndarray:
        """Vectorised: exactly l jumps with the given targets (jump_targets is (N, track))."""
        n_jumps = np.asarray(n_jumps)
        ok = n_jumps == self.l
        if self.l:
            if jump_targets.shape[1] < self.l:
                raise DomainError("jump tracking too short for the pattern")
            ok &= np.all(jump_targets[:, : self.l] == np.array(self.targets), axis=1)
        return ok

    def to_dict(self):
        return {"i0": self.i0, "targets": list(self.targets), "l": self.l}


def rn_weight(traj: Trajectory, model, pattern: JumpPattern, horizon_T: float, dt: float | None = None) -> float:
    """Likelihood-ratio weight of a reference-process trajectory; 0 off the pattern."""
    if traj.status != "completed":
        raise DomainError("weight needs a completed trajectory")
    if dt is not None and len(traj.times) > 1 and abs((traj.times[1] - traj.times[0]) - dt) > 1e-12:
        raise DomainError("dt does not match the trajectory")
    if int(traj.regimes[0]) != pattern.i0:
        return 0.0
    got = tuple(ev.to for ev in traj.jumps)
    if got != pattern.targets:
        return 0.0
    w = math.exp(horizon_T) * traj.weight_product * math.exp(-traj.intensity_integral)
    if not math.isfinite(w):
        raise NumericError("non-finite likelihood weight")
    return w


def _lhs_values(res, f, pattern):
    match = pattern.matches(res.n_jumps, res.jump_targets) & (res.status == COMPLETED)
    val = np.asarray(f(res.final_segment, res.final_regime), dtype=np.float64)
    return np.where(match, val, 0.0)


def _rhs_values(res, f, pattern, T):
    match = pattern.matches(res.n_jumps, res.jump_targets) & (res.status == COMPLETED)
    val = np.asarray(f(res.final_segment, np.full(res.paths.size, pattern.final)), dtype=np.float64)
    w = math.exp(T) * res.weight_product * np.exp(-res.intensity_integral)
    return np.where(match, val * w, 0.0)


def _run_side(model, fs, patterns, phi0, i0, cfg, N, mode, workers):
    track = max([p.l for p in patterns] + [1])
    T = cfg.horizon_T

    def functional(paths, seed):
        res = run_batch(model, phi0, i0, cfg, paths, mode, track=track)
        cols = []
        for p in patterns:
            for f in fs:
                cols.append(_lhs_values(res, f, p) if mode == "hybrid" else _rhs_values(res, f, p, T))
        cols.append((res.status == EXPLODED).astype(np.float64))
        return np.stack(cols, axis=1)

    return simulate_values(functional, N, cfg.master_seed, chunk_for(phi0.length, phi0.dim_n), workers)


def estimate_lhs(model, f, pattern, phi0, i0, cfg, N, workers=1) -> McEstimate:
    _check(pattern, i0, N)
    vals = _run_side(model, [f], [pattern], phi0, i0, cfg, N, "hybrid", workers)
    return estimate(vals[:, 0], cfg.master_seed)


def estimate_rhs(model, f, pattern, phi0, i0, cfg, N, workers=1) -> McEstimate:
    _check(pattern, i0, N)
    vals = _run_side(model, [f], [pattern], phi0, i0, cfg, N, "markov", workers)
    return estimate(vals[:, 0], cfg.master_seed)


def _check(pattern, i0, N):
    if pattern.i0 != i0:
        raise DomainError("pattern starts from a different regime")
    if N < 2:
        raise DomainError("N must be at least 2")


def compare_measures(lhs: McEstimate, rhs: McEstimate) -> dict:
    combined = math.sqrt(lhs.se ** 2 + rhs.se ** 2)
    diff = lhs.mean - rhs.mean
    if combined == 0:
        z = 0.0 if diff == 0 else math.copysign(math.inf, diff)
    else:
        z = diff / combined
    return {"z": z, "verdict": "pass" if abs(z) < 3 else "fail", "combined_se": combined}


def measure_comparison(model, fs: dict, patterns, phi0, i0, cfg: SimConfig, N: int,
                       rhs_seed: int | None = None, workers: int = 1) -> list:
    """Run one batch per side and compare every (pattern, f) pair.

    The reference side uses an independent seed (derived from the master seed
    unless given).  Returns one JSON-ready report per pair.
    """
    patterns = list(patterns)
    for p in patterns:
        _check(p, i0, N)
    names = list(fs)
    rhs_cfg = replace(cfg, master_seed=derive_seed(cfg.master_seed, 4, 3) if rhs_seed is None else int(rhs_seed))
    lv = _run_side(model, [fs[n] for n in names], patterns, phi0, i0, cfg, N, "hybrid", workers)
    rv = _run_side(model, [fs[n] for n in names], patterns, phi0, i0, rhs_cfg, N, "markov", workers)
    reports = []
    col = 0
    for p in patterns:
        for n in names:
            lhs = estimate(lv[:, col], cfg.master_seed)
            rhs = estimate(rv[:, col], rhs_cfg.master_seed)
            cmp = compare_measures(lhs, rhs)
            reports.append({
                "pattern": p.to_dict(), "f": n, "lhs": lhs.to_dict(), "rhs": rhs.to_dict(),
                "z": cmp["z"], "verdict": cmp["verdict"], "N": N, "dt": cfg.dt, "T": cfg.horizon_T,
                "seeds": {"lhs": cfg.master_seed, "rhs": rhs_cfg.master_seed},
                "exploded": {"lhs": int(lv[:, -1].sum()), "rhs": int(rv[:, -1].sum())},
            })
            col += 1
    return reports
