"""Learning allocations and equilibrium prices in matching markets from bandit feedback."""

from .alloc import AllocationOutcome, dual_value, max_surplus, solve_allocation, verify_stability
from .baselines import BaselineState, cucb_step, ir_step, rwe_step
from .datasets import RatingsCompleter, RatingsTable, complete_and_scale, ingest_ratings, sample_constraints, synth_instance
from .estimator import (
    ConfidenceSpec,
    ContextualRidge,
    EstimatorState,
    LowRankALS,
    beta_star,
    confidence_width,
    contains_truth,
    empirical_norm,
    fit_contextual,
    fit_lowrank,
    log_covering_bound,
    record_feedback,
    rho_star,
)
from .exceptions import (
    ConfigError,
    DimensionError,
    FeedbackMismatchError,
    ILAPError,
    NonFiniteError,
    RaggedRunsError,
    RatingsFormatError,
)
from .harness import Environment, ExperimentConfig, RunResult, compare, load_config, parse_config, run_experiment, run_round
from .market import Allocation, ConstraintProfile, RewardMatrix, RoundFeedback, realized_welfare, sample_rewards
from .metrics import RoundRecord, aggregate, round_instability, round_regret, theoretical_bound
from .ofu import PolicyDecision, decide, nu_default, optimistic_step_contextual, optimistic_step_lowrank

__version__ = "0.1.0"
