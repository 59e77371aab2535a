"""Synthetic instances, ratings ingestion with low-rank completion, and
per-round constraint samplers."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_is_fitted

from .exceptions import ConfigError, RatingsFormatError
from .market import ConstraintProfile, RewardMatrix

STATIC = "static"
DYNAMIC = "dynamic"
DYNAMIC_DEMAND_PROB = 0.2


def uniform_ball(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` points drawn uniformly from the unit ball in ``dim`` dimensions."""
    g = rng.standard_normal((n, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * rng.uniform(size=(n, 1)) ** (1.0 / dim)


def synth_instance(N: int, M: int, R: int, rng: np.random.Generator) -> RewardMatrix:
    F = uniform_ball(N, R, rng)
    Phi = uniform_ball(M, R, rng)
    return RewardMatrix.from_factors(F, Phi)


@dataclass
class RatingsTable:
    users: list[str]
    items: list[str]
    user_index: np.ndarray
    item_index: np.ndarray
    ratings: np.ndarray
    duplicates: int = 0
    source: str = field(default="", repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.users), len(self.items)

    @property
    def fill(self) -> float:
        N, M = self.shape
        return len(self.ratings) / (N * M)

    def summary(self) -> str:
        N, M = self.shape
        return f"{N} users, {M} items, {len(self.ratings)} ratings, fill {self.fill:.4f}, {self.duplicates} duplicates"

    def to_matrix(self) -> np.ndarray:
        """Dense matrix with NaN for unobserved pairs."""
        out = np.full(self.shape, np.nan)
        out[self.user_index, self.item_index] = self.ratings
        return out


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def ingest_ratings(path) -> RatingsTable:
    """Read ``user,item,rating`` lines; an optional non-numeric header is skipped.

    Ids are mapped to dense indices in order of first appearance. A repeated
    pair keeps its last rating.
    """
    path = Path(path)
    entries: dict[tuple[str, str], float] = {}
    duplicates = 0
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            fields = [c.strip() for c in row]
            if lineno == 1 and not _is_number(fields[0]):
                continue
            if len(fields) != 3:
                raise RatingsFormatError(f"{path}:{lineno}: expected 3 fields, got {len(fields)}")
            try:
                rating = float(fields[2])
            except ValueError:
                raise RatingsFormatError(f"{path}:{lineno}: rating {fields[2]!r} is not a number") from None
            if not math.isfinite(rating):
                raise RatingsFormatError(f"{path}:{lineno}: rating is not finite")
            key = (fields[0], fields[1])
            if key in entries:
                duplicates += 1
                del entries[key]  # re-insert so order follows the kept write
            entries[key] = rating
    if not entries:
        raise RatingsFormatError(f"{path}: no ratings found")

    users: dict[str, int] = {}
    items: dict[str, int] = {}
    for u, i in entries:
        users.setdefault(u, len(users))
        items.setdefault(i, len(items))
    keys = list(entries)
    return RatingsTable(
        users=list(users),
        items=list(items),
        user_index=np.array([users[u] for u, _ in keys]),
        item_index=np.array([items[i] for _, i in keys]),
        ratings=np.array([entries[k] for k in keys]),
        duplicates=duplicates,
        source=str(path),
    )


def _als_objective(F, Phi, mask, target, reg):
    resid = np.where(mask, F @ Phi.T - target, 0.0)
    return float((resid**2).sum() + reg * ((F**2).sum() + (Phi**2).sum()))


def _als_rows(mask, target, basis, reg):
    A = np.einsum("ki,ir,is->krs", mask, basis, basis) + reg * np.eye(basis.shape[1])
    b = (mask * target) @ basis
    return np.linalg.solve(A, b[..., None])[..., 0]


class RatingsCompleter(BaseEstimator):
    """Rank-``rank`` completion of a partially observed matrix by ridge ALS.

    ``fit`` takes a dense matrix with NaN for missing entries.
    """

    def __init__(self, rank=1, reg=1e-2, tol=1e-6, max_iter=200, random_state=None):
        self.rank = rank
        self.reg = reg
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise ValueError("ratings matrix must be 2-D")
        mask = ~np.isnan(X)
        if not mask.any():
            raise RatingsFormatError("cannot complete a matrix with no observed entries")
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.reg <= 0:
            raise ValueError("reg must be positive")
        target = np.where(mask, X, 0.0)
        w = mask.astype(float)
        rng = check_random_state(self.random_state)
        N, M = X.shape
        scale = math.sqrt(np.abs(target[mask]).mean() / self.rank) or 1.0
        F = rng.normal(0, scale, (N, self.rank))
        Phi = rng.normal(0, scale, (M, self.rank))
        trace = [_als_objective(F, Phi, mask, target, self.reg)]
        for it in range(int(self.max_iter)):
            F = _als_rows(w, target, Phi, self.reg)
            Phi = _als_rows(w.T, target.T, F, self.reg)
            trace.append(_als_objective(F, Phi, mask, target, self.reg))
            if trace[-2] - trace[-1] <= self.tol * max(trace[-2], np.finfo(float).tiny):
                break
        self.user_factors_ = F
        self.item_factors_ = Phi
        self.objective_trace_ = np.array(trace)
        self.n_iter_ = it + 1
        return self

    def predict(self, X=None):
        check_is_fitted(self, "user_factors_")
        return self.user_factors_ @ self.item_factors_.T

    def fit_predict(self, X, y=None):
        return self.fit(X).predict()


def complete_and_scale(table: RatingsTable, R: int, gamma_complete=1e-2, tol=1e-6, max_iter=200, rng=None) -> RewardMatrix:
    """Complete ``table`` to rank ``R`` and divide by the largest absolute entry."""
    model = RatingsCompleter(R, gamma_complete, tol, max_iter, _sk_seed(rng)).fit(table.to_matrix())
    return RewardMatrix(max_abs_scale(model.predict()))


def _sk_seed(rng):
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(2**31 - 1))
    return rng


def max_abs_scale(values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    top = np.abs(values).max(initial=0.0)
    return values / top if top > 0 else values.copy()


def balanced_factors(values, R: int) -> tuple[np.ndarray, np.ndarray]:
    """Rank-R truncated SVD split as F Phi^T with equal largest row norms on both sides."""
    U, s, Vt = np.linalg.svd(np.asarray(values, dtype=float), full_matrices=False)
    R = min(R, len(s))
    root = np.sqrt(s[:R])
    F, Phi = U[:, :R] * root, Vt[:R].T * root
    fmax, pmax = np.linalg.norm(F, axis=1).max(initial=0), np.linalg.norm(Phi, axis=1).max(initial=0)
    if fmax > 0 and pmax > 0:
        c = math.sqrt(pmax / fmax)
        F, Phi = F * c, Phi / c
    return F, Phi


def load_matrix(path) -> RewardMatrix:
    """Read a dense CSV matrix (one row per user)."""
    try:
        values = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read matrix {path}: {exc}") from None
    return RewardMatrix(values)


def write_matrix(path, values) -> None:
    np.savetxt(path, np.asarray(values), delimiter=",", fmt="%.9g")


def sample_constraints(mode: str, N: int, M: int, rng: np.random.Generator, t: int = 1) -> ConstraintProfile:
    """Demands and capacities for one round.

    In static mode callers draw once and reuse the profile for every round.
    """
    if mode == STATIC:
        demands = np.ones(N, dtype=np.int64)
    elif mode == DYNAMIC:
        demands = (rng.uniform(size=N) < DYNAMIC_DEMAND_PROB).astype(np.int64)
    else:
        raise ValueError(f"unknown setting {mode!r}")
    c_max = math.ceil(demands.sum() / M)
    if c_max == 0:
        capacities = np.zeros(M, dtype=np.int64)
    else:
        capacities = rng.integers(1, c_max + 1, size=M)
    return ConstraintProfile(demands, capacities, t)
