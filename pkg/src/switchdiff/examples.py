"""Ready-made models: delayed logistic ecology, pollution control, switched LQG.

Per-regime parameters accept a number (same in every regime), a sequence
indexed by regime 1, 2, ... (the last entry repeats beyond its end), or a
callable ``regime -> value``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import DomainError, ParameterError
from .history import constant_segment, Segment
from .integrator import SimConfig, run_batch
from .model import GlobalBound, HybridModel, LocalBound, constant_kernel, linear_apply
from .stats import chunk_for, estimate, simulate_values


def regime_value(value, i: int):
    if callable(value):
        return value(int(i))
    if isinstance(value, (list, tuple)):
        return value[min(int(i), len(value)) - 1]
    return value


def _per_regime(value, i):
    """Evaluate a scalar per-regime parameter on an array of regimes."""
    i = np.asarray(i, dtype=np.int64)
    if not callable(value) and not isinstance(value, (list, tuple)):
        return np.full(i.shape, float(value))
    out = np.empty(i.shape)
    for r in np.unique(i):
        out[i == r] = float(regime_value(value, r))
    return out


# ---------------------------------------------------------------- logistic ecology

@dataclass
class LogisticParams:
    a: Any = 1.0
    b: Any = 1.0
    sigma: Any = 0.3
    beta_weight: Any = 1.0
    delta_weight: Any = 0.0
    r: float = 1.0
    weight_sup: float | None = None

    def weight(self, value, i, lags):
        if callable(value):
            w = np.asarray(value(int(i), lags), dtype=np.float64)
        else:
            w = float(regime_value(value, i))
        return np.broadcast_to(w, lags.shape).astype(np.float64)

    def sup_of(self, value):
        if callable(value):
            return None
        if isinstance(value, (list, tuple)):
            return max(float(v) for v in value)
        return float(value)


def build_logistic(p: LogisticParams, log_transformed: bool = True) -> HybridModel:
    """Delayed-feedback logistic growth with birth-death regime switching.

    Up-rate from i: trapezoid integral of beta_weight(i, .) times the density
    segment; down-rate likewise with delta_weight, zero from regime 1.  With
    ``log_transformed`` the state is Y = log X and the density is e^Y.
    """
    probe = np.linspace(-p.r, 0.0, 5)
    for i in range(1, 6):
        for name in ("a", "b", "sigma"):
            if not float(regime_value(getattr(p, name), i)) > 0:
                raise ParameterError(f"{name}({i}) must be positive")
        for name in ("beta_weight", "delta_weight"):
            if np.any(p.weight(getattr(p, name), i, probe) < 0):
                raise ParameterError(f"{name} must be nonnegative")

    sup = p.weight_sup
    if sup is None:
        sb, sd = p.sup_of(p.beta_weight), p.sup_of(p.delta_weight)
        if sb is None or sd is None:
            raise ParameterError("callable weights need an explicit weight_sup")
        sup = sb + sd

    def density(values):
        return np.exp(values[..., 0]) if log_transformed else values[..., 0]

    def weighted_integral(seg, i, value):
        """Trapezoid integral of value(i, lag) * density over the segment."""
        i = np.asarray(i, dtype=np.int64)
        if seg.length == 1 or i.size == 0:
            return np.zeros(i.shape)
        dens = density(seg.values)
        base = np.full(seg.length, seg.grid_dt)
        base[0] *= 0.5
        base[-1] *= 0.5
        if not callable(value):
            return (dens * base).sum(axis=-1) * _per_regime(value, i)
        out = np.zeros(i.shape)
        lags = seg.lags()
        for r in np.unique(i):
            m = i == r
            out[m] = (dens[m] * (base * p.weight(value, r, lags))).sum(axis=-1)
        return out

    def intensity(seg, i, j):
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        out = np.zeros(i.shape)
        mu = j == i + 1
        md = (j == i - 1) & (i >= 2)
        if mu.any():
            out[mu] = weighted_integral(seg.take(mu), i[mu], p.beta_weight)
        if md.any():
            out[md] = weighted_integral(seg.take(md), i[md], p.delta_weight)
        return out

    def row(seg, i):
        i = np.asarray(i, dtype=np.int64)
        if seg.length > 1 and not callable(p.beta_weight) and not callable(p.delta_weight):
            base = np.full(seg.length, seg.grid_dt)
            base[0] *= 0.5
            base[-1] *= 0.5
            mass = (density(seg.values) * base).sum(axis=-1)
            up = mass * _per_regime(p.beta_weight, i)
            down = mass * _per_regime(p.delta_weight, i)
        else:
            up = weighted_integral(seg, i, p.beta_weight)
            down = weighted_integral(seg, i, p.delta_weight)
        down = np.where(i >= 2, down, 0.0)
        return np.stack([i - 1, i + 1], axis=-1), np.stack([down, up], axis=-1)

    def total_intensity(seg, i):
        Q = row(seg, i)[1]
        return Q[:, 0] + Q[:, 1]

    if log_transformed:
        def drift(x, i):
            a = _per_regime(p.a, i)
            b = _per_regime(p.b, i)
            s = _per_regime(p.sigma, i)
            return (a - 0.5 * s * s - b * np.exp(x[:, 0]))[:, None]

        def diffusion(x, i):
            return _per_regime(p.sigma, i)[:, None, None] * np.ones((x.shape[0], 1, 1))

        bound = LocalBound(lambda H: sup * p.r * np.exp(H))
    else:
        def drift(x, i):
            a = _per_regime(p.a, i)
            b = _per_regime(p.b, i)
            return (x[:, 0] * (a - b * x[:, 0]))[:, None]

        def diffusion(x, i):
            return (_per_regime(p.sigma, i) * x[:, 0])[:, None, None]

        bound = LocalBound(lambda H: sup * p.r * np.asarray(H))

    return HybridModel(
        dim_n=1, dim_d=1, delay_r=p.r, drift=drift, diffusion=diffusion,
        intensity=intensity, total_intensity=total_intensity, bound=bound,
        name="logistic", params={"log_transformed": log_transformed}, row=row,
    )


# ---------------------------------------------------------------- pollution

def default_pollution_sigma(x, i):
    return np.minimum(0.2 * (1.0 + np.abs(x)), 1.0)


@dataclass
class PollutionParams:
    rho: Any = 1.0
    sigma: Callable | None = None
    policy: Any = 0.5
    K0: float = 1.0
    utility_kappa: float = 0.5
    kappa_up: float = 0.5
    kappa_down: float = 0.5
    kernel: tuple | None = None

    def sigma_fn(self):
        return self.sigma if self.sigma is not None else default_pollution_sigma

    def policy_fn(self):
        pol = self.policy
        if callable(pol):
            return pol
        return lambda x, i: _per_regime(pol, i) + 0.0 * x

    def utility(self, c):
        k = self.utility_kappa
        return np.power(np.maximum(c, 0.0), k) / k

    @staticmethod
    def disutility(x):
        return x * x


def pollution_kernel(kappa_up: float, kappa_down: float):
    """Up-rate kappa_up * m / (1 + m) with m the mean |x| over the segment; constant down-rate."""

    def up(seg):
        v = np.abs(seg.values[..., 0])
        m = v.mean(axis=-1)
        return kappa_up * m / (1.0 + m)

    def intensity(seg, i, j):
        i = np.asarray(i)
        j = np.asarray(j)
        return np.where(j == i + 1, up(seg), 0.0) + np.where((j == i - 1) & (i >= 2), kappa_down, 0.0)

    def total_intensity(seg, i):
        i = np.asarray(i)
        return up(seg) + np.where(i >= 2, kappa_down, 0.0)

    return intensity, total_intensity, GlobalBound(max(kappa_up + kappa_down, 1e-12))


def birth_death_row(intensity):
    def row(seg, i):
        i = np.asarray(i, dtype=np.int64)
        J = np.stack([i - 1, i + 1], axis=-1)
        return J, np.stack([intensity(seg, i, J[:, 0]), intensity(seg, i, J[:, 1])], axis=-1)

    return row


def build_pollution(p: PollutionParams, r: float = 0.5, allow_degenerate: bool = False) -> HybridModel:
    """Pollution stock with consumption policy; ``allow_degenerate`` admits sigma = 0."""
    if not 0 < p.utility_kappa < 1:
        raise ParameterError("utility exponent must lie in (0, 1)")
    if not p.K0 > 0:
        raise ParameterError("K0 must be positive")
    pol = p.policy_fn()
    xs = np.linspace(-5.0, 5.0, 41)[:, None]
    for i in range(1, 6):
        ia = np.full(xs.shape[0], i)
        if not float(regime_value(p.rho, i)) > 0:
            raise ParameterError(f"rho({i}) must be positive")
        c = np.asarray(pol(xs[:, 0], ia), dtype=np.float64)
        if np.any(c < 0) or np.any(c > p.K0):
            raise ParameterError(f"policy leaves [0, {p.K0}] in regime {i}")
        s = np.asarray(p.sigma_fn()(xs[:, 0], ia), dtype=np.float64)
        if not np.all(np.isfinite(s)):
            raise ParameterError("sigma must be finite")
        if not allow_degenerate and np.any(s * s <= 0):
            raise ParameterError("sigma^2 must be positive")
    row = None
    if p.kernel is None:
        intensity, total, bound = pollution_kernel(p.kappa_up, p.kappa_down)
        row = birth_death_row(intensity)
    else:
        intensity, total, bound = p.kernel
    sig = p.sigma_fn()

    def drift(x, i):
        return (pol(x[:, 0], i) - _per_regime(p.rho, i) * x[:, 0])[:, None]

    def diffusion(x, i):
        return np.asarray(sig(x[:, 0], i), dtype=np.float64).reshape(-1, 1, 1) * np.ones((x.shape[0], 1, 1))

    return HybridModel(1, 1, r, drift, diffusion, intensity, total, bound, name="pollution", row=row)


# ---------------------------------------------------------------- switched LQG

@dataclass
class LqgParams:
    A: Any = -1.0
    B: Any = 0.0
    Sigma: Any = 0.0
    M: Any = 1.0
    N_cost: Any = 1.0
    D_terminal: Any = 0.0
    gain: Any = 0.0
    rates: dict = field(default_factory=lambda: {(1, 2): 1.0, (2, 1): 1.0})
    kernel: tuple | None = None
    r: float = 0.0

    def mat(self, name, i):
        return np.atleast_2d(np.asarray(regime_value(getattr(self, name), i), dtype=np.float64))


def build_lqg(p: LqgParams, n_regimes_checked: int = 3, allow_degenerate: bool = False) -> HybridModel:
    """Linear dynamics under the feedback u = -gain x; ``allow_degenerate`` admits a
    semidefinite control weight."""
    A1 = p.mat("A", 1)
    n1 = A1.shape[0]
    B1 = p.mat("B", 1)
    n2 = B1.shape[1]
    d = p.mat("Sigma", 1).shape[1]
    for i in range(1, n_regimes_checked + 1):
        shapes = {
            "A": (n1, n1), "B": (n1, n2), "Sigma": (n1, d), "M": (n1, n1),
            "N_cost": (n2, n2), "gain": (n2, n1),
        }
        for name, shape in shapes.items():
            if p.mat(name, i).shape != shape:
                raise ParameterError(f"{name}({i}) has shape {p.mat(name, i).shape}, expected {shape}")
        Nc = p.mat("N_cost", i)
        floor = -1e-12 if allow_degenerate else 0.0
        if not np.allclose(Nc, Nc.T) or np.linalg.eigvalsh(Nc).min() <= floor:
            raise ParameterError(f"N_cost({i}) must be positive {'semi' if allow_degenerate else ''}definite")
        Mc = p.mat("M", i)
        if not np.allclose(Mc, Mc.T) or np.linalg.eigvalsh(Mc).min() < -1e-12:
            raise ParameterError(f"M({i}) must be positive semidefinite")
    Dt = np.atleast_2d(np.asarray(p.D_terminal, dtype=np.float64))
    if Dt.shape != (n1, n1) or np.linalg.eigvalsh(Dt).min() < -1e-12:
        raise ParameterError("terminal weight must be an n1 x n1 positive semidefinite matrix")

    cache = {}

    def closed_loop(i):
        if i not in cache:
            cache[i] = (p.mat("A", i) - p.mat("B", i) @ p.mat("gain", i), p.mat("Sigma", i))
        return cache[i]

    def drift(x, i):
        out = np.empty_like(x)
        for r in np.unique(i):
            m = i == r
            out[m] = linear_apply(x[m], closed_loop(int(r))[0])
        return out

    def diffusion(x, i):
        out = np.empty((x.shape[0], n1, d))
        for r in np.unique(i):
            out[i == r] = closed_loop(int(r))[1]
        return out

    if p.kernel is None:
        intensity, total = constant_kernel(p.rates)
        rows = {}
        for (a, _), q in p.rates.items():
            rows[a] = rows.get(a, 0.0) + q
        bound = GlobalBound(max(list(rows.values()) + [1e-12]))
    else:
        intensity, total, bound = p.kernel
    return HybridModel(n1, d, p.r, drift, diffusion, intensity, total, bound, name="lqg")


# ---------------------------------------------------------------- cost functionals

def _initial_segment(model, x0, cfg):
    if isinstance(x0, Segment):
        return x0
    return constant_segment(np.broadcast_to(np.asarray(x0, dtype=np.float64), (model.dim_n,)), model.delay_r, cfg.dt)


def evaluate_welfare(model, p: PollutionParams, cfg: SimConfig, N: int, x0=0.0, i0: int = 1, workers: int = 1):
    """Time-averaged welfare (1/T) E int_0^T [U(c) - D(X)] dt."""
    if N < 2:
        raise DomainError("N must be at least 2")
    phi0 = _initial_segment(model, x0, cfg)
    pol = p.policy_fn()

    def running(seg, i):
        x = seg.current[:, 0]
        return p.utility(pol(x, i)) - p.disutility(x)

    def functional(paths, seed):
        res = run_batch(model, phi0, i0, cfg, paths, "hybrid", {"w": running}, track=1)
        return np.where(res.completed, res.integrals["w"] / cfg.horizon_T, np.nan)

    vals = simulate_values(functional, N, cfg.master_seed, chunk_for(phi0.length), workers)
    return estimate(vals, cfg.master_seed)


def evaluate_quadratic_cost(model, p: LqgParams, cfg: SimConfig, N: int, x0=1.0, i0: int = 1, workers: int = 1):
    """E[int_0^T (x'Mx + u'Nu) dt + X_T' D X_T] under the feedback u = -gain x."""
    if N < 2:
        raise DomainError("N must be at least 2")
    phi0 = _initial_segment(model, x0, cfg)
    Dt = np.atleast_2d(np.asarray(p.D_terminal, dtype=np.float64))

    def quad(x, Q):
        return np.einsum("na,ab,nb->n", x, Q, x)

    def running(seg, i):
        x = seg.current
        out = np.empty(x.shape[0])
        for r in np.unique(i):
            m = i == r
            K = p.mat("gain", int(r))
            u = linear_apply(x[m], K)
            out[m] = quad(x[m], p.mat("M", int(r))) + quad(u, p.mat("N_cost", int(r)))
        return out

    def functional(paths, seed):
        res = run_batch(model, phi0, i0, cfg, paths, "hybrid", {"c": running}, track=1)
        val = res.integrals["c"] + quad(res.final_state, Dt)
        return np.where(res.completed, val, np.nan)

    vals = simulate_values(functional, N, cfg.master_seed, chunk_for(phi0.length, model.dim_n), workers)
    return estimate(vals, cfg.master_seed)
