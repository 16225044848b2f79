"""Euler-Maruyama integration of the coupled system with thinned regime jumps.

One engine, three modes:

* ``hybrid``: coefficients follow the current regime, jumps are thinned
  candidates of a dominating Poisson stream (the interlacing construction).
* ``frozen``: coefficients stay at the initial regime for the whole horizon
  while the regime process is generated exactly as in ``hybrid``.
* ``markov``: the regime is the autonomous reference chain with unit exit
  rate and geometric targets; coefficients follow it, and the likelihood
  factors needed for reweighting are accumulated along the way.

Candidate times that fall between grid points are handled by sampling the
Brownian bridge at the candidate time, advancing the state by a partial
step, and evaluating the intensity on the segment at that instant.  A
rejected candidate does not split the step, so without accepted jumps the
path is exactly the plain Euler-Maruyama path of its Brownian increments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import DomainError, NumericError, ParameterError
from .history import Segment, SegmentRing
from .model import GlobalBound, HybridModel, LocalBound, jump_targets

COMPLETED, EXPLODED, BUDGET = 0, 1, 2
STATUS_NAMES = {COMPLETED: "completed", EXPLODED: "exploded", BUDGET: "jump-budget-exhausted"}
MODES = ("hybrid", "frozen", "markov")


@dataclass(frozen=True)
class SimConfig:
    dt: float
    horizon_T: float
    master_seed: int = 0
    max_jumps: int = 10_000
    explosion_threshold: float = 1e8

    def __post_init__(self):
        if not (self.dt > 0 and self.horizon_T > 0):
            raise ParameterError("dt and horizon must be positive")
        if self.dt > self.horizon_T * (1 + 1e-12):
            raise ParameterError("dt exceeds the horizon")
        k = self.horizon_T / self.dt
        if abs(k - round(k)) > 1e-9 * max(1.0, k):
            raise ParameterError(f"horizon {self.horizon_T} is not a multiple of dt {self.dt}")
        if self.max_jumps < 1:
            raise ParameterError("max_jumps must be positive")
        if not self.explosion_threshold > 0:
            raise ParameterError("explosion threshold must be positive")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon_T / self.dt))


@dataclass(frozen=True)
class JumpEvent:
    time: float
    from_: int
    to: int
    state: tuple = ()


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    regimes: np.ndarray
    jumps: list
    status: str
    end_time: float
    final_segment: Segment
    weight_product: float = 1.0
    intensity_integral: float = 0.0
    integrals: dict = field(default_factory=dict)

    def regime_at(self, t: float) -> int:
        """Right-continuous regime from the jump log."""
        reg = int(self.regimes[0])
        for ev in self.jumps:
            if ev.time <= t:
                reg = ev.to
            else:
                break
        return reg


@dataclass
class BatchResult:
    paths: np.ndarray
    status: np.ndarray
    end_time: np.ndarray
    final_state: np.ndarray
    final_segment: Segment
    final_regime: np.ndarray
    n_jumps: np.ndarray
    jump_times: np.ndarray
    jump_targets: np.ndarray
    integrals: dict
    weight_product: np.ndarray
    intensity_integral: np.ndarray
    refreshes: np.ndarray
    violations: np.ndarray
    states: np.ndarray | None = None
    grid_regimes: np.ndarray | None = None
    jump_logs: list | None = None
    brownian_end: np.ndarray | None = None
    brownian_qv: np.ndarray | None = None

    @property
    def completed(self) -> np.ndarray:
        return self.status == COMPLETED


# ---------------------------------------------------------------- reference chain

def qtilde_rate(i, j):
    """Off-diagonal entry of the reference generator: 2^-j below i, 2^(1-j) above."""
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    return np.ldexp(1.0, -j + (j > i))


def qtilde_row(i: int, j_max: int):
    if i < 1:
        raise DomainError("regimes are positive integers")
    return [(j, float(qtilde_rate(i, j))) for j in range(1, j_max + 1) if j != i]


def sample_qtilde_target(i, u):
    """Inverse-CDF target of the reference chain, exact for all j (no truncation).

    With w = 1 - u and m = floor(-log2 w): the target is m + 1 when
    w > 2^(1-i) (a target below i) and m + 2 otherwise (a target above i).
    """
    i = np.asarray(i, dtype=np.int64)
    w = 1.0 - np.asarray(u, dtype=np.float64)
    mant, ex = np.frexp(w)
    m = -ex.astype(np.int64) + (mant == 0.5)
    below = w > np.ldexp(1.0, (1 - i))
    return np.where(below, m + 1, m + 2)


# ---------------------------------------------------------------- Euler-Maruyama

def _matvec(sig, dw):
    """sigma @ dW as an explicitly ordered sum over Brownian components."""
    out = sig[..., 0] * dw[..., 0:1]
    for q in range(1, dw.shape[-1]):
        out = out + sig[..., q] * dw[..., q:q + 1]
    return out


def _em_update(x, b, sig, h, dw):
    h = np.asarray(h, dtype=np.float64)
    if h.ndim:
        h = h[:, None]
    return x + b * h + _matvec(sig, dw)


def em_step(x, i: int, model: HybridModel, dt_step: float, dW) -> np.ndarray:
    """x + b(x, i) dt + sigma(x, i) dW for one path."""
    x = np.asarray(x, dtype=np.float64).reshape(1, model.dim_n)
    dW = np.asarray(dW, dtype=np.float64).reshape(1, model.dim_d)
    ia = np.array([int(i)])
    b = model.drift(x, ia)
    sig = model.diffusion(x, ia)
    with np.errstate(all="ignore"):
        out = _em_update(x, b, sig, dt_step, dW)[0]
    if not np.all(np.isfinite(out)):
        raise NumericError("Euler-Maruyama step produced a non-finite state")
    return out


def brownian_increments(master_seed, paths, step, d, dt):
    """The Brownian increments the engine uses on grid step ``step``."""
    return math.sqrt(dt) * rng.normals(master_seed, paths, rng.BROWNIAN, step, d)


# ---------------------------------------------------------------- batch engine

def run_batch(
    model: HybridModel,
    phi0: Segment,
    i0: int,
    cfg: SimConfig,
    paths,
    mode: str = "hybrid",
    integrands: dict | None = None,
    track: int = 4,
    record: bool = False,
    brownian: bool = False,
) -> BatchResult:
    """Simulate the paths with the given indices; every path is independent of the others.

    ``integrands`` maps names to ``g(seg, regime) -> (N,)``; each is integrated
    over [0, T] by the left-endpoint rule on the grid refined by accepted jump
    times (the value just after a jump starts a new piece).  With
    ``brownian`` the result also carries W(T) and the sum of squared grid
    increments of each path's driving Brownian motion.
    """
    if mode not in MODES:
        raise DomainError(f"unknown mode {mode!r}")
    if i0 < 1:
        raise DomainError("initial regime must be a positive integer")
    dt = cfg.dt
    if abs(phi0.grid_dt - dt) > 1e-12 * dt:
        raise DomainError(f"initial segment grid {phi0.grid_dt} differs from dt {dt}")
    if phi0.dim_n != model.dim_n:
        raise DomainError("initial segment dimension does not match the model")
    paths = np.atleast_1d(np.asarray(paths, dtype=np.int64))
    integrands = integrands or {}
    with np.errstate(all="ignore"):
        return _Engine(model, phi0, int(i0), cfg, paths, mode, integrands, track, record, brownian).run()


class _Engine:
    def __init__(self, model, phi0, i0, cfg, paths, mode, integrands, track, record, brownian=False):
        self.model, self.cfg, self.mode = model, cfg, mode
        self.i0 = i0
        self.paths = paths
        self.upaths = paths.astype(np.uint64)
        self.integrands = integrands
        self.track = track
        self.record = record
        self.brownian = brownian
        N = paths.size
        self.w_end = np.zeros((N, model.dim_d))
        self.w_qv = np.zeros((N, model.dim_d))
        self.N = N
        self.ring = SegmentRing(phi0, N)
        self.regime = np.full(N, i0, dtype=np.int64)
        self.active = np.ones(N, dtype=bool)
        self.status = np.zeros(N, dtype=np.int8)
        self.end_time = np.full(N, cfg.horizon_T)
        self.n_jumps = np.zeros(N, dtype=np.int64)
        self.jt = np.full((N, track), np.nan)
        self.jto = np.zeros((N, track), dtype=np.int64)
        self.acc = {k: np.zeros(N) for k in integrands}
        self.weight = np.ones(N)
        self.qint = np.zeros(N)
        self.refreshes = np.zeros(N, dtype=np.int64)
        self.violations = np.zeros(N, dtype=np.int64)
        self.ev = np.zeros(N, dtype=np.uint64)
        self.cand_ctr = np.zeros(N, dtype=np.uint64)
        self.next_ev = np.zeros(N)
        self.next_mark = np.zeros(N)
        self.next_tgt = np.zeros(N, dtype=np.int64)
        self.tag = rng.CHAIN if mode == "markov" else rng.PRM
        bound = model.bound
        self.local = isinstance(bound, LocalBound) and mode != "markov"
        if mode == "markov":
            self.rate = np.ones(N)
        elif self.local:
            self.level = phi0.as_batch().sup_norm()[0] + bound.margin + np.zeros(N)
            self.rate = bound.rate(self.level)
        else:
            self.rate = np.full(N, float(bound.M))
        if record:
            self.states = np.full((N, cfg.n_steps + 1, model.dim_n), np.nan)
            self.states[:, 0] = self.ring.current()
            self.grid_regimes = np.zeros((N, cfg.n_steps + 1), dtype=np.int64)
            self.grid_regimes[:, 0] = i0
            self.logs = [[] for _ in range(N)]
        self._schedule(np.arange(N), np.zeros(N))

    def _schedule(self, idx, base):
        if idx.size == 0:
            return
        u = rng.uniforms(self.cfg.master_seed, self.upaths[idx], self.tag, self.ev[idx], 2)
        self.cand_ctr[idx] = self.ev[idx]
        self.ev[idx] += np.uint64(1)
        self.next_ev[idx] = base + rng.exponentials(u[:, 0]) / self.rate[idx]
        if self.mode == "markov":
            self.next_tgt[idx] = sample_qtilde_target(self.regime[idx], u[:, 1])
        else:
            self.next_mark[idx] = u[:, 1] * self.rate[idx]

    def _coef_regime(self, reg):
        return np.full_like(reg, self.i0) if self.mode == "frozen" else reg

    def run(self) -> BatchResult:
        cfg, model = self.cfg, self.model
        dt = cfg.dt
        d = model.dim_d
        seed = cfg.master_seed
        need_g = bool(self.integrands) or self.mode == "markov"
        for k in range(cfg.n_steps):
            if not self.active.any():
                break
            t0 = k * dt
            x = self.ring.current().copy()
            dW = brownian_increments(seed, self.upaths, k, d, dt)
            if self.brownian:
                self.w_end += dW
                self.w_qv += dW * dW
            creg = self._coef_regime(self.regime)
            ob = np.array(model.drift(x, creg), dtype=np.float64)
            osig = np.array(model.diffusion(x, creg), dtype=np.float64)
            ox = x.copy()
            os_ = np.zeros(self.N)
            oW = np.zeros((self.N, d))
            aS = np.zeros(self.N)
            aW = np.zeros((self.N, d))
            gs = np.zeros(self.N)
            if need_g:
                seg = self.ring.segment()
                gcur = {name: np.array(fn(seg, self.regime), dtype=np.float64) for name, fn in self.integrands.items()}
                qcur = np.array(model.total_intensity(seg, self.regime), dtype=np.float64) if self.mode == "markov" else None
            pending = np.flatnonzero(self.active & (self.next_ev - t0 < dt))
            while pending.size:
                idx = pending
                s = self.next_ev[idx] - t0
                span = dt - aS[idx]
                lam = (s - aS[idx]) / span
                var = np.maximum((s - aS[idx]) * (dt - s) / span, 0.0)
                z = rng.normals(seed, self.upaths[idx], rng.BRIDGE, self.cand_ctr[idx], d)
                Ws = aW[idx] + lam[:, None] * (dW[idx] - aW[idx]) + np.sqrt(var)[:, None] * z
                aS[idx] = s
                aW[idx] = Ws
                xs = _em_update(ox[idx], ob[idx], osig[idx], s - os_[idx], Ws - oW[idx])
                seg_s = self.ring.tentative(idx, xs, s / dt)
                cur = self.regime[idx]
                if self.mode == "markov":
                    tgt = self.next_tgt[idx]
                    accept = np.ones(idx.size, dtype=bool)
                else:
                    qtot = np.asarray(model.total_intensity(seg_s, cur), dtype=np.float64)
                    viol = qtot > self.rate[idx]
                    if viol.any():
                        v_idx = idx[viol]
                        self.violations[v_idx] += 1
                        if self.local:
                            self.level[v_idx] = np.maximum(
                                self.level[v_idx], seg_s.take(viol).sup_norm() + model.bound.margin
                            )
                            self.rate[v_idx] = np.maximum(model.bound.rate(self.level[v_idx]), qtot[viol])
                            self.refreshes[v_idx] += 1
                    accept = ~viol & (self.next_mark[idx] < qtot) if self.local else self.next_mark[idx] < qtot
                    tgt = np.zeros(idx.size, dtype=np.int64)
                    if accept.any():
                        a = np.flatnonzero(accept)
                        tgt[a] = jump_targets(model, seg_s.take(a), cur[a], self.next_mark[idx][a], qtot[a])
                        accept &= tgt > 0
                over = accept & (self.n_jumps[idx] >= cfg.max_jumps)
                if over.any():
                    o_idx = idx[over]
                    self.status[o_idx] = BUDGET
                    self.active[o_idx] = False
                    self.end_time[o_idx] = self.next_ev[o_idx]
                    accept &= ~over
                if accept.any():
                    a = np.flatnonzero(accept)
                    a_idx = idx[a]
                    sa = s[a]
                    new = tgt[a]
                    if self.mode == "markov":
                        q_pair = np.asarray(model.intensity(seg_s.take(a), cur[a], new), dtype=np.float64)
                        self.weight[a_idx] *= q_pair / qtilde_rate(cur[a], new)
                        self.qint[a_idx] += qcur[a_idx] * (sa - gs[a_idx])
                    for name in self.integrands:
                        self.acc[name][a_idx] += gcur[name][a_idx] * (sa - gs[a_idx])
                    nj = self.n_jumps[a_idx]
                    slot = nj < self.track
                    self.jt[a_idx[slot], nj[slot]] = self.next_ev[a_idx[slot]]
                    self.jto[a_idx[slot], nj[slot]] = new[slot]
                    if self.record:
                        for p, fr, to, tm, st in zip(a_idx, cur[a], new, self.next_ev[a_idx], xs[a]):
                            self.logs[p].append(JumpEvent(float(tm), int(fr), int(to), tuple(float(v) for v in st)))
                    self.n_jumps[a_idx] += 1
                    self.regime[a_idx] = new
                    gs[a_idx] = sa
                    if self.mode != "frozen":
                        ox[a_idx] = xs[a]
                        os_[a_idx] = sa
                        oW[a_idx] = Ws[a]
                        ob[a_idx] = model.drift(xs[a], new)
                        osig[a_idx] = model.diffusion(xs[a], new)
                    if need_g:
                        seg_a = seg_s.take(a)
                        for name, fn in self.integrands.items():
                            gcur[name][a_idx] = fn(seg_a, new)
                        if self.mode == "markov":
                            qcur[a_idx] = model.total_intensity(seg_a, new)
                live = idx[self.active[idx]]
                self._schedule(live, self.next_ev[live])
                pending = live[self.next_ev[live] - t0 < dt]
            x_new = _em_update(ox, ob, osig, dt - os_, dW - oW)
            if need_g:
                rest = dt - gs
                for name in self.integrands:
                    self.acc[name] += np.where(self.active, gcur[name] * rest, 0.0)
                if self.mode == "markov":
                    self.qint += np.where(self.active, qcur * rest, 0.0)
            norm = np.sqrt((x_new * x_new).sum(axis=1))
            bad = self.active & ~(norm <= cfg.explosion_threshold)
            if self.record:
                self.states[self.active | bad, k + 1] = x_new[self.active | bad]
                self.grid_regimes[:, k + 1] = self.regime
            if bad.any():
                self.status[bad] = EXPLODED
                self.end_time[bad] = (k + 1) * dt
                self.active &= ~bad
            x_new[~self.active] = x[~self.active]
            self.ring.push(x_new)
            if self.local:
                up = np.flatnonzero(self.active & (norm > self.level))
                if up.size:
                    self.level[up] = self.ring.segment(up).sup_norm() + model.bound.margin
                    self.rate[up] = model.bound.rate(self.level[up])
                    self.refreshes[up] += 1
                    self._schedule(up, np.full(up.size, (k + 1) * dt))
        return self._result()

    def _result(self) -> BatchResult:
        res = BatchResult(
            paths=self.paths,
            status=self.status,
            end_time=self.end_time,
            final_state=self.ring.current().copy(),
            final_segment=Segment(
                self.ring.window().copy(), self.ring.grid_dt, self.ring.delay_r, self.ring.adjusted
            ),
            final_regime=self.regime,
            n_jumps=self.n_jumps,
            jump_times=self.jt,
            jump_targets=self.jto,
            integrals=self.acc,
            weight_product=self.weight,
            intensity_integral=self.qint,
            refreshes=self.refreshes,
            violations=self.violations,
        )
        if self.brownian:
            res.brownian_end = self.w_end
            res.brownian_qv = self.w_qv
        if self.record:
            res.states = self.states
            res.grid_regimes = self.grid_regimes
            res.jump_logs = self.logs
        return res


# ---------------------------------------------------------------- single-path wrappers

def _trajectory(res: BatchResult, cfg: SimConfig, p: int = 0) -> Trajectory:
    n_steps = cfg.n_steps
    times = np.arange(n_steps + 1) * cfg.dt
    last = int(math.floor(res.end_time[p] / cfg.dt + 1e-9))
    last = min(last, n_steps)
    return Trajectory(
        times=times[: last + 1],
        states=res.states[p, : last + 1],
        regimes=res.grid_regimes[p, : last + 1],
        jumps=list(res.jump_logs[p]),
        status=STATUS_NAMES[int(res.status[p])],
        end_time=float(res.end_time[p]),
        final_segment=res.final_segment.take(p),
        weight_product=float(res.weight_product[p]),
        intensity_integral=float(res.intensity_integral[p]),
        integrals={k: float(v[p]) for k, v in res.integrals.items()},
    )


def simulate_hybrid(model, phi0, i0, cfg, path_index: int = 0, integrands=None) -> Trajectory:
    res = run_batch(model, phi0, i0, cfg, [path_index], "hybrid", integrands, record=True)
    return _trajectory(res, cfg)


def simulate_frozen(model, phi0, i, cfg, path_index: int = 0, integrands=None) -> Trajectory:
    res = run_batch(model, phi0, i, cfg, [path_index], "frozen", integrands, record=True)
    return _trajectory(res, cfg)


def simulate_markov_modulated(model, phi0, i0, cfg, path_index: int = 0, integrands=None) -> Trajectory:
    res = run_batch(model, phi0, i0, cfg, [path_index], "markov", integrands, record=True)
    return _trajectory(res, cfg)
