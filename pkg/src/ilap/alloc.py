"""Exact allocation solver with capacity prices and stability checks.

The allocation LP has a totally unimodular constraint matrix, so it is
solved as a min-cost flow; the flow is integral by construction. Capacity
prices are the entrywise-minimal optimal dual variables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._flow import minimal_prices, ssp_allocate
from .exceptions import DimensionError, NonFiniteError
from .market import Allocation, ConstraintProfile, RewardMatrix


@dataclass(frozen=True)
class AllocationOutcome:
    allocation: Allocation
    welfare: float
    prices: np.ndarray
    demand_duals: np.ndarray
    duality_gap: float

    @property
    def dual_objective(self) -> float:
        return self.welfare + self.duality_gap


def _as_values(theta) -> np.ndarray:
    values = theta.values if isinstance(theta, RewardMatrix) else np.asarray(theta, dtype=float)
    if values.ndim != 2:
        raise DimensionError(f"reward matrix must be 2-D, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise NonFiniteError("reward matrix has non-finite entries")
    return values


def _top_positive_sum(gains: np.ndarray, k: int) -> float:
    if k <= 0:
        return 0.0
    pos = gains[gains > 0]
    if pos.size <= k:
        return float(pos.sum())
    return float(np.partition(pos, pos.size - k)[pos.size - k:].sum())


def _best_bundles(gains: np.ndarray, demands: np.ndarray) -> np.ndarray:
    """Row-wise sum of the top-``demands[u]`` strictly positive entries."""
    N, M = gains.shape
    ranked = -np.sort(-np.maximum(gains, 0.0), axis=1)
    csum = np.concatenate([np.zeros((N, 1)), np.cumsum(ranked, axis=1)], axis=1)
    return csum[np.arange(N), np.minimum(demands, M)]


def dual_value(prices, theta, constraints: ConstraintProfile) -> float:
    """The Lagrangian dual function: capacity payments plus every user's best relaxed bundle."""
    values = _as_values(theta)
    p = np.asarray(prices, dtype=float)
    users = _best_bundles(values - p[None, :], constraints.demands)
    return float(p @ constraints.capacities) + float(users.sum())


def solve_allocation(theta, constraints: ConstraintProfile, tol: float = 1e-12) -> AllocationOutcome:
    """Welfare-maximizing feasible allocation with its minimal supporting prices.

    Pairs with nonpositive reward are never allocated. Among optimal dual
    price vectors the entrywise-minimal one is returned.
    """
    values = _as_values(theta)
    constraints.check_shape(values.shape)
    values = np.ascontiguousarray(values)
    d, c = constraints.demands, constraints.capacities
    scale = max(1.0, float(np.abs(values).max(initial=0.0)))
    X = ssp_allocate(values, d, c, tol * scale)
    p = minimal_prices(values, X, d, c)

    welfare = float((X * values).sum())
    gains = values - p[None, :]
    held = X.sum(axis=1)
    free = np.where(X == 0, gains, -np.inf)
    best_free = free.max(axis=1, initial=-np.inf)
    q = np.where(held >= d, np.maximum(best_free, 0.0), 0.0)
    gap = dual_value(p, values, constraints) - welfare
    return AllocationOutcome(Allocation(X), welfare, p, q, gap)


def max_surplus(user_rewards, prices, demand: int, accept_reject: bool = False) -> float:
    """Best surplus a user can reach with at most ``demand`` items.

    Only items with strictly positive surplus are ever worth taking, so the
    accept/reject filter never changes the answer.
    """
    theta = np.asarray(user_rewards, dtype=float)
    return _top_positive_sum(theta - np.asarray(prices, dtype=float), int(demand))


def verify_stability(alloc: Allocation, prices, truth, constraints: ConstraintProfile, accept_reject: bool = False):
    """Per-user instability (max surplus minus obtained surplus) and its total."""
    values = _as_values(truth)
    constraints.check_shape(values.shape)
    p = np.asarray(prices, dtype=float)
    gains = values - p[None, :]
    obtained = np.where(values >= p[None, :], gains, 0.0) if accept_reject else gains
    per_user = _best_bundles(gains, constraints.demands) - (alloc.matrix * obtained).sum(axis=1)
    per_user = np.maximum(per_user, 0.0)
    return per_user, float(per_user.sum())
