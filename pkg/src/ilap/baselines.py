"""Comparison policies: greedy re-estimation (RWE), a capacity-unaware
recommender (IR) and per-pair combinatorial UCB (CUCB)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .alloc import solve_allocation
from .estimator import CONTEXTUAL, EstimatorState, fit_contextual, fit_lowrank
from .market import Allocation, ConstraintProfile, Pair

RWE = "rwe"
IR = "ir"
CUCB = "cucb"


@dataclass
class BaselineState:
    kind: str
    stats: EstimatorState
    t: int = 1

    def __post_init__(self):
        if self.kind not in (RWE, IR, CUCB):
            raise ValueError(f"unknown baseline {self.kind!r}")


def ucb_radius(counts, t: int) -> np.ndarray:
    """sqrt(3 ln t / (2 n)); infinite where n = 0."""
    n = np.asarray(counts, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(n > 0, np.sqrt(1.5 * math.log(max(t, 1)) / np.maximum(n, 1)), np.inf)


def pair_means(counts, sums) -> np.ndarray:
    n = np.asarray(counts, dtype=float)
    return np.divide(sums, n, out=np.zeros_like(n), where=n > 0)


def rwe_step(state: BaselineState, constraints: ConstraintProfile, random_state=None):
    """Allocate and price at the current point estimate, with no exploration bonus."""
    stats = state.stats
    if stats.mode == CONTEXTUAL:
        theta_hat = fit_contextual(stats)
    else:
        fit_lowrank(stats, random_state=random_state)
        theta_hat = stats.theta_hat
    out = solve_allocation(theta_hat, constraints)
    return out.allocation, out.prices


def cucb_index(counts, sums, t: int) -> np.ndarray:
    index = pair_means(counts, sums) + ucb_radius(counts, t)
    return np.minimum(index, 1.0)


def cucb_step(state: BaselineState, constraints: ConstraintProfile):
    index = cucb_index(state.stats.counts, state.stats.sums, state.t)
    out = solve_allocation(index, constraints)
    return out.allocation, out.prices


def ir_step(state: BaselineState, constraints: ConstraintProfile, rng: np.random.Generator):
    """Each user requests its top-d items by UCB index; over-subscribed items keep
    a uniformly random subset of requesters.

    Returns ``(kept allocation, zero prices, eliminated pairs)``.
    """
    counts = state.stats.counts
    N, M = counts.shape
    index = pair_means(counts, state.stats.sums) + ucb_radius(counts, state.t)
    # stable sort on -index: unexplored (inf) first, ties by lowest item index
    order = np.argsort(-index, axis=1, kind="stable")
    request = np.zeros((N, M), dtype=np.int8)
    for u, d in enumerate(constraints.demands):
        request[u, order[u, : min(int(d), M)]] = 1

    kept = request.copy()
    eliminated: list[Pair] = []
    for i in range(M):
        users = np.flatnonzero(request[:, i])
        cap = int(constraints.capacities[i])
        if len(users) > cap:
            keep = rng.choice(users, size=cap, replace=False)
            drop = np.setdiff1d(users, keep)
            kept[drop, i] = 0
            eliminated.extend((int(u), i) for u in drop)
    return Allocation(kept), np.zeros(M), sorted(eliminated)
