"""Simulation and verification of switching diffusions with past-dependent switching."""
from .errors import (
    DegenerateEstimateError, DomainError, KernelInconsistencyError, NumericError, ParameterError,
    ScenarioError, SwitchDiffError,
)
from .history import Segment, SegmentRing, constant_segment, grid_length, segment_from_function
from .model import (
    GlobalBound, HybridModel, LocalBound, ValidationReport, constant_coefficients, constant_kernel,
    delta_intervals, jump_map_h, jump_targets, validate_model,
)
from .switching import CandidateEvent, attempt_switch, next_candidate, survival_probability
from .integrator import (
    BatchResult, JumpEvent, SimConfig, Trajectory, qtilde_rate, qtilde_row, run_batch, sample_qtilde_target,
    simulate_frozen, simulate_hybrid, simulate_markov_modulated,
)
from .girsanov import JumpPattern, compare_measures, estimate_lhs, estimate_rhs, measure_comparison, rn_weight
from .generator import TestFunction, apply_generator, dynkin_check, dynkin_residual, intensity_probe
from .stats import McEstimate, estimate, feller_probe, monte_carlo, strong_feller_probe
from .examples import (
    LogisticParams, LqgParams, PollutionParams, build_logistic, build_lqg, build_pollution,
    evaluate_quadratic_cost, evaluate_welfare,
)

__all__ = [name for name in dir() if not name.startswith("_")]
