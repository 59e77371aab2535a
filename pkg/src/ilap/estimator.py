"""Regularized least-squares estimation of the reward matrix and confidence sets.

Observations enter only through per-pair sufficient statistics (counts, sums
and sums of squares), so each fit is a closed-form weighted ridge problem
per user (and, for the low-rank model, per item).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DimensionError, FeedbackMismatchError
from .market import Allocation, RoundFeedback

CONTEXTUAL = "contextual"
LOWRANK = "lowrank"
L2 = "L2"
L2_INF = "L2inf"


@dataclass
class EstimatorState:
    """Per-pair observation statistics plus the prior the fit shrinks toward."""

    counts: np.ndarray
    sums: np.ndarray
    sq_sums: np.ndarray
    prior: np.ndarray
    gamma: float = 1.0
    G: float = 1.0
    mode: str = CONTEXTUAL
    rank: int = 1
    item_features: np.ndarray | None = None
    theta_hat: np.ndarray | None = None
    factors: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    @classmethod
    def fresh(cls, shape, *, gamma=1.0, G=1.0, mode=CONTEXTUAL, rank=1, item_features=None, prior=None):
        N, M = shape
        prior = np.zeros(shape) if prior is None else np.asarray(prior, dtype=float)
        if prior.shape != (N, M):
            raise DimensionError(f"prior has shape {prior.shape}, expected {(N, M)}")
        if mode not in (CONTEXTUAL, LOWRANK):
            raise ValueError(f"unknown mode {mode!r}")
        if gamma < 1:
            raise ValueError("gamma must be >= 1")
        if item_features is not None:
            item_features = np.atleast_2d(np.asarray(item_features, dtype=float))
            if item_features.shape[0] != M:
                raise DimensionError(f"item features have {item_features.shape[0]} rows, expected {M}")
            rank = item_features.shape[1]
        return cls(
            counts=np.zeros(shape, dtype=np.int64),
            sums=np.zeros(shape),
            sq_sums=np.zeros(shape),
            prior=prior,
            gamma=float(gamma),
            G=float(G),
            mode=mode,
            rank=int(rank),
            item_features=item_features,
        )

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape

    def copy(self) -> EstimatorState:
        return EstimatorState(
            self.counts.copy(),
            self.sums.copy(),
            self.sq_sums.copy(),
            self.prior,
            self.gamma,
            self.G,
            self.mode,
            self.rank,
            self.item_features,
            None if self.theta_hat is None else self.theta_hat.copy(),
            self.factors,
        )


def record_feedback(state: EstimatorState, alloc: Allocation, feedback: RoundFeedback) -> EstimatorState:
    """Add one round of observations to ``state`` in place and return it."""
    pairs = alloc.pairs
    if set(pairs) != set(feedback.rewards):
        raise FeedbackMismatchError(
            f"feedback covers {sorted(feedback.rewards)} but the allocation is {pairs}"
        )
    if not pairs:
        return state
    u, i = np.array(pairs).T
    r = np.array([feedback.rewards[p] for p in pairs])
    state.counts[u, i] += 1
    state.sums[u, i] += r
    state.sq_sums[u, i] += r * r
    return state


def _ridge_rows(weights, targets, basis):
    """Row-wise minimizers of sum_i w_ki (x_k . basis_i)^2 - 2 (x_k . basis_i) targets_ki.

    Uses the least-norm solution, so a rank-deficient basis is handled.
    """
    A = np.einsum("ki,ir,is->krs", weights, basis, basis)
    b = targets @ basis
    return np.einsum("krs,ks->kr", np.linalg.pinv(A, rcond=1e-12, hermitian=True), b)


def ls_objective(theta, counts, sums, sq_sums, prior, gamma) -> float:
    """Squared prediction error over all observations plus the prior penalty."""
    fit = (counts * theta**2 - 2 * theta * sums).sum() + sq_sums.sum()
    return float(fit + gamma * ((theta - prior) ** 2).sum())


class ContextualRidge(BaseEstimator):
    """User factors for known item features by regularized least squares.

    The objective is convex in the user factors, so one batched ridge solve
    (one R x R system per user) gives its exact minimizer.
    """

    def __init__(self, item_features=None, gamma=1.0):
        self.item_features = item_features
        self.gamma = gamma

    def fit(self, counts, sums, prior=None):
        Phi = check_array(self.item_features, ensure_min_samples=1)
        counts = check_array(counts, dtype=float)
        sums = check_array(sums, dtype=float)
        if counts.shape != sums.shape or counts.shape[1] != Phi.shape[0]:
            raise DimensionError("counts, sums and item features disagree in shape")
        prior = np.zeros(counts.shape) if prior is None else check_array(prior, dtype=float)
        self.user_factors_ = _ridge_rows(counts + self.gamma, sums + self.gamma * prior, Phi)
        self.theta_hat_ = self.user_factors_ @ Phi.T
        return self

    def predict(self):
        check_is_fitted(self, "theta_hat_")
        return self.theta_hat_


class LowRankALS(BaseEstimator):
    """Rank-``rank`` factorization fit by alternating exact ridge solves.

    ``objective_trace_`` holds the objective after every half-step and is
    nonincreasing because each block update is an exact minimization.
    """

    def __init__(self, rank=1, gamma=1.0, tol=1e-6, max_iter=50, random_state=None):
        self.rank = rank
        self.gamma = gamma
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, counts, sums, prior=None, sq_sums=None):
        counts = check_array(counts, dtype=float)
        sums = check_array(sums, dtype=float)
        N, M = counts.shape
        prior = np.zeros((N, M)) if prior is None else check_array(prior, dtype=float)
        sq_sums = np.zeros((N, M)) if sq_sums is None else np.asarray(sq_sums, dtype=float)
        rng = check_random_state(self.random_state)
        R = int(self.rank)
        if R < 1:
            raise ValueError("rank must be >= 1")
        bound = 1 / math.sqrt(R)
        F = rng.uniform(-bound, bound, (N, R))
        Phi = rng.uniform(-bound, bound, (M, R))

        weights = counts + self.gamma
        targets = sums + self.gamma * prior
        trace = []
        prev = None
        for it in range(int(self.max_iter)):
            F = _ridge_rows(weights, targets, Phi)
            trace.append(ls_objective(F @ Phi.T, counts, sums, sq_sums, prior, self.gamma))
            Phi = _ridge_rows(weights.T, targets.T, F)
            cur = ls_objective(F @ Phi.T, counts, sums, sq_sums, prior, self.gamma)
            trace.append(cur)
            if prev is not None and prev - cur <= self.tol * max(abs(prev), np.finfo(float).tiny):
                break
            prev = cur
        self.user_factors_ = F
        self.item_factors_ = Phi
        self.objective_trace_ = np.array(trace)
        self.n_iter_ = it + 1
        self.theta_hat_ = F @ Phi.T
        return self

    def predict(self):
        check_is_fitted(self, "theta_hat_")
        return self.theta_hat_


def fit_contextual(state: EstimatorState, item_features=None) -> np.ndarray:
    """Refit the contextual estimate, store it on ``state`` and return it."""
    Phi = state.item_features if item_features is None else item_features
    if Phi is None:
        raise ValueError("contextual fit needs item features")
    model = ContextualRidge(Phi, state.gamma).fit(state.counts, state.sums, state.prior)
    state.theta_hat = model.theta_hat_
    state.factors = (model.user_factors_, np.asarray(Phi, dtype=float))
    return state.theta_hat


def fit_lowrank(state: EstimatorState, rank=None, tol=1e-6, max_iter=50, random_state=None):
    """Refit the low-rank estimate; returns ``(F, Phi, objective_trace)``."""
    model = LowRankALS(rank or state.rank, state.gamma, tol, max_iter, random_state)
    model.fit(state.counts, state.sums, state.prior, state.sq_sums)
    state.theta_hat = model.theta_hat_
    state.factors = (model.user_factors_, model.item_factors_)
    return model.user_factors_, model.item_factors_, model.objective_trace_


def rho_star(delta, alpha, gamma, t, N, M, R, eta, G) -> float:
    """Confidence radius (squared) for the contextual per-user ellipsoids."""
    head = 8 * eta**2 * R * math.log(3 * N / (alpha * delta)) + 4 * gamma * G**2
    tail = 2 * alpha * t * math.sqrt(M) * (8 + math.sqrt(8 * eta**2 * math.log(4 * M * N * t**2 / delta)))
    return head + tail


def log_covering_bound(N, M, R, alpha) -> float:
    """Upper bound on the log alpha-covering number of bounded rank-R matrices."""
    return (N + M + 1) * R * math.log(9 * math.sqrt(N * M) / alpha)


def beta_star(delta, alpha, gamma, t, N, M, R, eta, G) -> float:
    """Confidence radius (squared) for the low-rank Frobenius-type ellipsoid."""
    log_cover = log_covering_bound(N, M, R, alpha)
    head = 8 * eta**2 * (log_cover + math.log(1 / delta)) + 4 * gamma * G**2
    tail = 2 * alpha * t * math.sqrt(N * M) * (8 + math.sqrt(8 * eta**2 * math.log(4 * N * M * t**2 / delta)))
    return head + tail


def empirical_norm(delta_matrix, counts, gamma, kind=L2) -> float:
    D = np.asarray(delta_matrix, dtype=float)
    per_user = ((np.asarray(counts) + gamma) * D**2).sum(axis=1)
    if kind == L2:
        return math.sqrt(per_user.sum())
    if kind == L2_INF:
        return math.sqrt(per_user.max(initial=0.0))
    raise ValueError(f"unknown norm kind {kind!r}")


def confidence_width(alloc: Allocation, counts, gamma) -> float:
    """Sum of 1 / (count + gamma) over the allocated pairs."""
    X = alloc.matrix.astype(bool)
    return float((1.0 / (np.asarray(counts)[X] + gamma)).sum())


@dataclass(frozen=True)
class ConfidenceSpec:
    delta: float
    alpha: float
    radius: float
    norm_kind: str

    @classmethod
    def for_round(cls, mode, t, *, delta, alpha, gamma, N, M, R, eta, G) -> ConfidenceSpec:
        if mode == CONTEXTUAL:
            return cls(delta, alpha, rho_star(delta, alpha, gamma, t, N, M, R, eta, G), L2_INF)
        return cls(delta, alpha, beta_star(delta, alpha, gamma, t, N, M, R, eta, G), L2)


def contains_truth(state: EstimatorState, spec: ConfidenceSpec, truth) -> bool:
    values = getattr(truth, "values", truth)
    dist = empirical_norm(values - state.theta_hat, state.counts, state.gamma, spec.norm_kind)
    return dist <= math.sqrt(spec.radius)
