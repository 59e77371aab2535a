"""Stateful policies driven by the simulation loop.

Each policy answers ``act(t, constraints)`` with an :class:`Action` and then
learns from ``observe(action, feedback)``. The feedback covers every pair in
``action.observed`` (kept pairs plus any pairs a policy requested but lost).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .alloc import solve_allocation
from .baselines import CUCB, IR, RWE, BaselineState, cucb_step, ir_step, rwe_step
from .estimator import (
    CONTEXTUAL,
    ConfidenceSpec,
    EstimatorState,
    confidence_width,
    fit_contextual,
    fit_lowrank,
    record_feedback,
)
from .market import Allocation, ConstraintProfile, Pair, RoundFeedback
from .ofu import decide

ILAP_CX = "ilap-cx"
ILAP_LR = "ilap-lr"
ORACLE = "oracle"
ALGORITHMS = (ILAP_CX, ILAP_LR, RWE, IR, CUCB, ORACLE)


@dataclass(frozen=True)
class Action:
    allocation: Allocation
    prices: np.ndarray
    base_prices: np.ndarray
    width: float
    eliminated: tuple[Pair, ...] = ()
    optimistic_value: float = math.nan
    confidence: ConfidenceSpec | None = field(default=None, repr=False)

    @property
    def observed(self) -> Allocation:
        if not self.eliminated:
            return self.allocation
        X = self.allocation.matrix.copy()
        for u, i in self.eliminated:
            X[u, i] = 1
        return Allocation(X)


@dataclass
class RadiusParams:
    delta: float
    alpha: float
    eta: float
    R: int

    def spec(self, mode, t, state: EstimatorState) -> ConfidenceSpec:
        N, M = state.shape
        return ConfidenceSpec.for_round(
            mode, t, delta=self.delta, alpha=self.alpha, gamma=state.gamma,
            N=N, M=M, R=self.R, eta=self.eta, G=state.G,
        )


class Policy:
    name = "policy"

    def __init__(self, state: EstimatorState, rng: np.random.Generator | None = None):
        self.state = state
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.last_confidence: ConfidenceSpec | None = None

    def act(self, t: int, constraints: ConstraintProfile) -> Action:
        raise NotImplementedError

    def observe(self, action: Action, feedback: RoundFeedback) -> None:
        record_feedback(self.state, action.observed, feedback)

    def _seed(self) -> int:
        return int(self.rng.integers(2**31 - 1))


class ILAPPolicy(Policy):
    """Optimistic allocation with dual prices discounted by ``nu`` times the root width."""

    def __init__(self, state, radius: RadiusParams, nu=0.0, rng=None):
        super().__init__(state, rng)
        self.radius = radius
        self.nu = float(nu)
        self.name = ILAP_CX if state.mode == CONTEXTUAL else ILAP_LR

    def act(self, t, constraints):
        if self.state.mode == CONTEXTUAL:
            fit_contextual(self.state)
        else:
            fit_lowrank(self.state, random_state=self._seed())
        spec = self.radius.spec(self.state.mode, t, self.state)
        self.last_confidence = spec
        dec = decide(self.state, spec, constraints, self.nu)
        return Action(dec.allocation, dec.offered_prices, dec.base_prices, dec.width,
                      optimistic_value=dec.optimistic_value, confidence=spec)


class BaselinePolicy(Policy):
    def __init__(self, kind: str, state, rng=None):
        super().__init__(state, rng)
        self.name = kind
        self.base = BaselineState(kind, state)

    def act(self, t, constraints):
        self.base.t = t
        eliminated = ()
        if self.name == RWE:
            seed = None if self.state.mode == CONTEXTUAL else self._seed()
            alloc, prices = rwe_step(self.base, constraints, seed)
        elif self.name == CUCB:
            alloc, prices = cucb_step(self.base, constraints)
        else:
            alloc, prices, eliminated = ir_step(self.base, constraints, self.rng)
        width = confidence_width(alloc, self.state.counts, self.state.gamma)
        return Action(alloc, prices, prices, width, tuple(eliminated))


class OraclePolicy(Policy):
    """Allocates and prices at the true rewards; its regret is zero by construction."""

    name = ORACLE

    def __init__(self, state, truth, rng=None):
        super().__init__(state, rng)
        self.truth = np.asarray(getattr(truth, "values", truth), dtype=float)

    def act(self, t, constraints):
        out = solve_allocation(self.truth, constraints)
        width = confidence_width(out.allocation, self.state.counts, self.state.gamma)
        return Action(out.allocation, out.prices, out.prices, width, optimistic_value=out.welfare)


def make_policy(algorithm, state: EstimatorState, *, radius=None, nu=0.0, truth=None, rng=None) -> Policy:
    if algorithm in (ILAP_CX, ILAP_LR):
        return ILAPPolicy(state, radius, nu, rng)
    if algorithm in (RWE, IR, CUCB):
        return BaselinePolicy(algorithm, state, rng)
    if algorithm == ORACLE:
        return OraclePolicy(state, truth, rng)
    raise ValueError(f"unknown algorithm {algorithm!r}")


