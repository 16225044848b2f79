"""Regime jumps by thinning a dominating homogeneous Poisson stream.

A Poisson point (t, z) with z uniform on [0, M) triggers i -> j when z lies
in the interval of j.  These are the single-path building blocks; the batch
engine in ``integrator`` inlines the same steps over arrays of paths.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .model import HybridModel, jump_targets
from .rng import PathStream


@dataclass(frozen=True)
class CandidateEvent:
    time: float
    uniform_mark: float


def next_candidate(stream: PathStream, current_time: float, M_current: float) -> CandidateEvent:
    if not M_current > 0:
        raise DomainError(f"dominating rate must be positive, got {M_current}")
    u = stream.uniforms(2)
    wait = -math.log1p(-u[0]) / M_current
    return CandidateEvent(current_time + wait, u[1] * M_current)


def attempt_switch(model: HybridModel, phi, i: int, mark: float):
    """Target regime if the mark lands in some interval, else None."""
    if mark < 0:
        raise DomainError("mark must be nonnegative")
    j = int(jump_targets(model, phi.as_batch(), np.array([int(i)]), np.array([float(mark)]))[0])
    return j if j else None


def survival_probability(q_values, dt: float) -> float:
    """exp(-sum q dt), the conditional probability of no jump along a path."""
    q = np.asarray(q_values, dtype=np.float64)
    if np.any(q < 0):
        raise DomainError("intensities must be nonnegative")
    if not dt > 0:
        raise DomainError("dt must be positive")
    return float(np.exp(-q.sum() * dt))
