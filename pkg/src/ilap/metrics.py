"""Per-round regret and instability, cumulative summaries, and regret bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .alloc import solve_allocation, verify_stability
from .estimator import CONTEXTUAL, LOWRANK
from .exceptions import RaggedRunsError
from .market import Allocation, ConstraintProfile, RewardMatrix, realized_welfare

REGRET_TOL = 1e-8


@dataclass(frozen=True)
class RoundRecord:
    t: int
    welfare: float
    optimal_welfare: float
    regret: float
    instability: float
    rejections: int
    width: float
    optimistic_value: float = math.nan
    covered: bool | None = None


def _values(truth):
    if isinstance(truth, RewardMatrix):
        return truth.values
    return np.asarray(truth, dtype=float)


def optimal_welfare(truth, constraints: ConstraintProfile) -> float:
    return solve_allocation(_values(truth), constraints).welfare


def round_regret(alloc: Allocation, prices, truth, constraints, accept_reject=False, optimum=None) -> float:
    """Price-free optimum minus realized welfare; ``optimum`` skips the re-solve."""
    if optimum is None:
        optimum = optimal_welfare(truth, constraints)
    truth = truth if isinstance(truth, RewardMatrix) else RewardMatrix(np.asarray(truth, dtype=float))
    regret = optimum - realized_welfare(alloc, truth, prices, accept_reject)
    assert regret >= -REGRET_TOL, f"negative regret {regret}"
    return float(regret)


def round_instability(alloc: Allocation, prices, truth, constraints, accept_reject=False) -> float:
    return verify_stability(alloc, prices, _values(truth), constraints, accept_reject)[1]


def rejections(alloc: Allocation, prices, truth) -> int:
    """Allocated pairs whose mean reward is strictly below the price."""
    p = np.asarray(prices, dtype=float)
    return int((alloc.matrix.astype(bool) & (_values(truth) < p[None, :])).sum())


def confidence_scale(mode: str, radius_T: float, N: int, T: int, gamma: float) -> float:
    """kappa_T for the contextual model, lambda_T for the low-rank one."""
    log_term = math.log(1 + T / gamma)
    if mode == CONTEXTUAL:
        return 8 * N * radius_T * log_term
    if mode == LOWRANK:
        return 8 * radius_T * log_term
    raise ValueError(f"unknown mode {mode!r}")


def theoretical_bound(mode, radius_T, N, M, n, T, gamma, accept_reject=False) -> tuple[float, float]:
    """High-probability bounds on cumulative welfare regret and instability.

    The low-rank bound has no per-round user count; it uses N in place of n.
    Both bounds coincide in form, so the pair holds the same number twice.
    """
    if T <= 0:
        return 0.0, 0.0
    scale = confidence_scale(mode, radius_T, N, T, gamma)
    size = (n if mode == CONTEXTUAL else N) * M * T
    bound = math.sqrt(scale * size)
    if accept_reject:
        bound += scale**0.25 * size**0.75
    return bound, bound


@dataclass(frozen=True)
class Summary:
    t: np.ndarray
    regret_mean: np.ndarray
    regret_std: np.ndarray
    instability_mean: np.ndarray
    instability_std: np.ndarray
    cum_regret_mean: np.ndarray
    cum_regret_std: np.ndarray
    cum_instability_mean: np.ndarray
    cum_instability_std: np.ndarray


def aggregate(runs) -> Summary:
    """Mean and population std across runs, per round and cumulatively."""
    runs = [list(r) for r in runs]
    if not runs:
        raise RaggedRunsError("no runs to aggregate")
    lengths = {len(r) for r in runs}
    if len(lengths) != 1:
        raise RaggedRunsError(f"runs have different lengths {sorted(lengths)}")
    regret = np.array([[rec.regret for rec in r] for r in runs], dtype=float).reshape(len(runs), -1)
    instab = np.array([[rec.instability for rec in r] for r in runs], dtype=float).reshape(len(runs), -1)
    cum_r, cum_i = regret.cumsum(axis=1), instab.cumsum(axis=1)
    t = np.array([rec.t for rec in runs[0]], dtype=int)
    return Summary(
        t,
        regret.mean(axis=0),
        regret.std(axis=0),
        instab.mean(axis=0),
        instab.std(axis=0),
        cum_r.mean(axis=0),
        cum_r.std(axis=0),
        cum_i.mean(axis=0),
        cum_i.std(axis=0),
    )
