"""Ground-truth market: rewards, constraints, allocations and user behaviour."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionError, NonFiniteError

Pair = tuple[int, int]


@dataclass(frozen=True)
class RewardMatrix:
    """Mean rewards of every (user, item) pair, optionally in factor form.

    When ``user_features`` and ``item_features`` are given, ``values`` must
    equal their product and every feature row must lie in the unit ball.
    """

    values: np.ndarray
    user_features: np.ndarray | None = None
    item_features: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DimensionError(f"reward matrix must be 2-D, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise NonFiniteError("reward matrix has non-finite entries")
        object.__setattr__(self, "values", values)
        if (self.user_features is None) != (self.item_features is None):
            raise DimensionError("user_features and item_features must be given together")
        if self.user_features is not None:
            F = np.atleast_2d(np.asarray(self.user_features, dtype=float))
            Phi = np.atleast_2d(np.asarray(self.item_features, dtype=float))
            if F.shape[0] != values.shape[0] or Phi.shape[0] != values.shape[1] or F.shape[1] != Phi.shape[1]:
                raise DimensionError(
                    f"factor shapes {F.shape}, {Phi.shape} do not match values {values.shape}"
                )
            object.__setattr__(self, "user_features", F)
            object.__setattr__(self, "item_features", Phi)

    @classmethod
    def from_factors(cls, user_features, item_features) -> RewardMatrix:
        F = np.atleast_2d(np.asarray(user_features, dtype=float))
        Phi = np.atleast_2d(np.asarray(item_features, dtype=float))
        return cls(F @ Phi.T, F, Phi)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def rank(self) -> int | None:
        return None if self.item_features is None else self.item_features.shape[1]

    def check_invariants(self, atol: float = 1e-12) -> None:
        """Raise ``ValueError`` if any documented invariant is violated."""
        if np.abs(self.values).max(initial=0.0) > 1 + atol:
            raise ValueError("reward entries must lie in [-1, 1]")
        if self.user_features is not None:
            if not np.allclose(self.user_features @ self.item_features.T, self.values, rtol=0, atol=atol):
                raise ValueError("values differ from the factor product")
            for name, A in (("user", self.user_features), ("item", self.item_features)):
                if np.linalg.norm(A, axis=1).max(initial=0.0) > 1 + atol:
                    raise ValueError(f"{name} feature rows must have norm <= 1")


@dataclass(frozen=True)
class ConstraintProfile:
    """Per-round demands (items per user) and capacities (users per item)."""

    demands: np.ndarray
    capacities: np.ndarray
    t: int = 1

    def __post_init__(self):
        d = np.asarray(self.demands, dtype=np.int64).ravel()
        c = np.asarray(self.capacities, dtype=np.int64).ravel()
        if (d < 0).any() or (c < 0).any():
            raise ValueError("demands and capacities must be nonnegative")
        object.__setattr__(self, "demands", d)
        object.__setattr__(self, "capacities", c)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.demands), len(self.capacities)

    @property
    def active_users(self) -> np.ndarray:
        return np.flatnonzero(self.demands > 0)

    def admits(self, X: np.ndarray) -> bool:
        X = np.asarray(X)
        return bool(
            X.shape == self.shape
            and np.isin(X, (0, 1)).all()
            and (X.sum(axis=1) <= self.demands).all()
            and (X.sum(axis=0) <= self.capacities).all()
        )

    def check_shape(self, shape: tuple[int, int]) -> None:
        if self.shape != tuple(shape):
            raise DimensionError(f"constraints are {self.shape} but the market is {tuple(shape)}")


@dataclass(frozen=True)
class Allocation:
    """Binary allocation matrix; ``pairs`` is its set representation."""

    matrix: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.matrix)
        if X.ndim != 2 or not np.isin(X, (0, 1)).all():
            raise ValueError("allocation must be a binary 2-D matrix")
        object.__setattr__(self, "matrix", X.astype(np.int8))

    @classmethod
    def empty(cls, shape: tuple[int, int]) -> Allocation:
        return cls(np.zeros(shape, dtype=np.int8))

    @classmethod
    def from_pairs(cls, pairs, shape: tuple[int, int]) -> Allocation:
        X = np.zeros(shape, dtype=np.int8)
        for u, i in pairs:
            X[u, i] = 1
        return cls(X)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def pairs(self) -> list[Pair]:
        """Allocated pairs in lexicographic (user, item) order."""
        return [(int(u), int(i)) for u, i in zip(*np.nonzero(self.matrix))]

    def __len__(self) -> int:
        return int(self.matrix.sum())

    def __eq__(self, other):
        return isinstance(other, Allocation) and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())


@dataclass
class RoundFeedback:
    """Observed rewards of every allocated pair, and whether it was accepted."""

    rewards: dict[Pair, float] = field(default_factory=dict)
    accepted: dict[Pair, bool] = field(default_factory=dict)


def _prices(prices, M: int) -> np.ndarray:
    p = np.zeros(M) if prices is None else np.asarray(prices, dtype=float).ravel()
    if p.shape != (M,):
        raise DimensionError(f"expected {M} prices, got {p.shape[0]}")
    return p


def sample_rewards(alloc: Allocation, truth: RewardMatrix, eta: float, rng: np.random.Generator) -> RoundFeedback:
    """Draw Gaussian rewards with mean ``truth`` and std ``eta`` for allocated pairs.

    A full matrix of standard normals is drawn and only the allocated entries
    are read, so a pair's reward does not depend on what else was allocated.
    """
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    if alloc.shape != truth.shape:
        raise DimensionError(f"allocation {alloc.shape} vs truth {truth.shape}")
    z = rng.standard_normal(truth.shape)
    return feedback_from_noise(alloc, truth, eta, z)


def feedback_from_noise(alloc: Allocation, truth: RewardMatrix, eta: float, z: np.ndarray) -> RoundFeedback:
    R = truth.values + eta * z
    return RoundFeedback(rewards={(u, i): float(R[u, i]) for u, i in alloc.pairs})


def acceptance_mask(truth: RewardMatrix, prices) -> np.ndarray:
    """1 where a user would accept the item at the posted price (ties accept)."""
    p = _prices(prices, truth.shape[1])
    return (truth.values >= p[None, :]).astype(np.int8)


def realized_welfare(alloc: Allocation, truth: RewardMatrix, prices=None, accept_reject: bool = False) -> float:
    X = alloc.matrix
    if X.shape != truth.shape:
        raise DimensionError(f"allocation {X.shape} vs truth {truth.shape}")
    gain = truth.values
    if accept_reject:
        gain = gain * acceptance_mask(truth, prices)
    return float((X * gain).sum())


def surplus(user_rewards, x, prices, accept_reject: bool = False) -> float:
    """Surplus of one user holding bundle ``x`` at ``prices``."""
    theta = np.asarray(user_rewards, dtype=float)
    x = np.asarray(x)
    gain = theta - _prices(prices, theta.shape[0])
    if accept_reject:
        gain = np.where(gain >= 0, gain, 0.0)
    return float(x @ gain)
