"""Optimistic joint choice of allocation and reward matrix, and the resulting prices."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .alloc import solve_allocation
from .estimator import CONTEXTUAL, LOWRANK, ConfidenceSpec, EstimatorState, confidence_width
from .market import Allocation, ConstraintProfile

OUTER_MAX_ITER = 20
INNER_MAX_ITER = 50
REL_TOL = 1e-6


@dataclass(frozen=True)
class PolicyDecision:
    allocation: Allocation
    optimistic_theta: np.ndarray
    base_prices: np.ndarray
    offered_prices: np.ndarray
    width: float
    inner_iterations: int
    outer_iterations: int = 0
    value_trace: tuple[float, ...] = ()

    @property
    def optimistic_value(self) -> float:
        return float((self.allocation.matrix * self.optimistic_theta).sum())


def _pinv_stack(W: np.ndarray) -> np.ndarray:
    # factor matrices may lose rank in the alternating steps; plain inv would not notice
    return np.linalg.pinv(W, rcond=1e-12, hermitian=True)


def _user_ellipsoids(item_features, counts, gamma):
    Phi = np.asarray(item_features, dtype=float)
    W = np.einsum("ui,ir,is->urs", np.asarray(counts) + gamma, Phi, Phi)
    return Phi, _pinv_stack(W)


def _user_factors(theta_hat, Phi):
    return np.linalg.lstsq(Phi, np.asarray(theta_hat, dtype=float).T, rcond=None)[0].T


def optimistic_step_contextual(theta_hat, item_features, counts, gamma, radius, alloc: Allocation) -> np.ndarray:
    """Maximize <X, F Phi^T> over every user's ellipsoid around the estimate.

    The confidence set is a product of per-user ellipsoids, so the linear
    objective separates and each user moves along W_u^{-1} a_u to the boundary.
    """
    Phi, Winv = _user_ellipsoids(item_features, counts, gamma)
    F = _user_factors(theta_hat, Phi)
    a = alloc.matrix @ Phi
    v = np.einsum("urs,us->ur", Winv, a)
    norm = np.sqrt(np.maximum(np.einsum("ur,ur->u", a, v), 0.0))
    moving = norm > 0
    F[moving] += math.sqrt(radius) * v[moving] / norm[moving, None]
    return F @ Phi.T


def optimistic_index_contextual(theta_hat, item_features, counts, gamma, radius) -> np.ndarray:
    """Largest value of each single entry over its user's ellipsoid."""
    Phi, Winv = _user_ellipsoids(item_features, counts, gamma)
    spread = np.einsum("ir,urs,is->ui", Phi, Winv, Phi)
    return np.asarray(theta_hat) + math.sqrt(radius) * np.sqrt(np.maximum(spread, 0.0))


def _ball_block(basis, weights, target, direction, radius, current):
    """One block of the low-rank step: rows x_k with fixed ``basis``.

    Maximizes sum_k direction_k . (basis x_k) subject to
    sum_k ||basis x_k - target_k||^2_{weights_k} <= radius.
    """
    W = np.einsum("ki,ir,is->krs", weights, basis, basis)
    Winv = _pinv_stack(W)
    g = np.einsum("krs,ks->kr", Winv, (weights * target) @ basis)
    resid = (weights * (g @ basis.T - target) ** 2).sum()
    budget = radius - resid
    a = direction @ basis
    v = np.einsum("krs,ks->kr", Winv, a)
    total = float(np.einsum("kr,kr->", a, v))
    if total <= 0 or budget <= 0:
        # nothing to gain or no slack: keep the feasible current point
        return current
    return g + math.sqrt(budget) * v / math.sqrt(total)


def optimistic_step_lowrank(factors, theta_hat, counts, gamma, radius, alloc: Allocation, max_iter=INNER_MAX_ITER, tol=REL_TOL):
    """Alternate exact user-block and item-block maximizations over the shared ball.

    Returns ``(F, Phi, trace)``; ``trace`` holds <X, F Phi^T> after every block
    update and never decreases.
    """
    F, Phi = (np.array(f, dtype=float) for f in factors)
    X = alloc.matrix.astype(float)
    weights = np.asarray(counts) + gamma
    theta_hat = np.asarray(theta_hat, dtype=float)
    trace = [float((X * (F @ Phi.T)).sum())]
    if radius <= 0 or not X.any():
        return F, Phi, trace
    for _ in range(max_iter):
        F = _ball_block(Phi, weights, theta_hat, X, radius, F)
        trace.append(float((X * (F @ Phi.T)).sum()))
        Phi = _ball_block(F, weights.T, theta_hat.T, X.T, radius, Phi)
        trace.append(float((X * (F @ Phi.T)).sum()))
        prev, cur = trace[-3], trace[-1]
        if abs(cur - prev) <= tol * max(abs(prev), 1e-12):
            break
    return F, Phi, trace


def optimistic_index_lowrank(theta_hat, counts, gamma, radius) -> np.ndarray:
    """Largest value of each single entry over the ball, ignoring the rank limit."""
    return np.asarray(theta_hat) + np.sqrt(radius / (np.asarray(counts) + gamma))


def decide(state: EstimatorState, spec: ConfidenceSpec, constraints: ConstraintProfile, nu: float = 0.0) -> PolicyDecision:
    """Optimistic allocation, its dual prices and the width-discounted offer.

    Alternates an optimistic reward step at a fixed allocation with an exact
    allocation solve at the optimistic rewards. The first allocation is the
    solve on per-entry optimistic indices, which is already the joint optimum
    when every user demands at most one item.
    """
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    counts, gamma, radius = state.counts, state.gamma, spec.radius
    theta_hat = state.theta_hat
    if state.mode == CONTEXTUAL:
        Phi = state.item_features
        index = optimistic_index_contextual(theta_hat, Phi, counts, gamma, radius)
    elif state.mode == LOWRANK:
        factors = state.factors
        index = optimistic_index_lowrank(theta_hat, counts, gamma, radius)
    else:
        raise ValueError(f"unknown mode {state.mode!r}")

    X = solve_allocation(index, constraints).allocation
    value = -np.inf
    values = []
    inner_total = 0
    for outer in range(1, OUTER_MAX_ITER + 1):
        if state.mode == CONTEXTUAL:
            theta = optimistic_step_contextual(theta_hat, Phi, counts, gamma, radius, X)
            inner_total += 1
        else:
            F, P, trace = optimistic_step_lowrank(factors, theta_hat, counts, gamma, radius, X)
            factors = (F, P)
            theta = F @ P.T
            inner_total += max(len(trace) - 1, 0) // 2
        outcome = solve_allocation(theta, constraints)
        X = outcome.allocation
        new_value = outcome.welfare
        values.append(new_value)
        if abs(new_value - value) <= REL_TOL * max(abs(value), 1e-12):
            break
        value = new_value

    width = confidence_width(X, counts, gamma)
    base = outcome.prices
    offered = base if nu == 0 else np.maximum(base - nu * math.sqrt(width), 0.0)
    return PolicyDecision(X, theta, base, offered, width, inner_total, outer, tuple(values))


def nu_default(mode: str, radius_T: float, n_or_N: int, M: int) -> float:
    """Price discount scale from the regret analysis."""
    if mode == CONTEXTUAL:
        return (4 * radius_T / (n_or_N * M**2)) ** 0.25
    if mode == LOWRANK:
        return (4 * radius_T / (n_or_N**2 * M**2)) ** 0.25
    raise ValueError(f"unknown mode {mode!r}")
