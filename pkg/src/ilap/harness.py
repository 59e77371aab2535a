"""Experiment configuration, the simulation loop and result files."""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .alloc import solve_allocation
from .datasets import STATIC, balanced_factors, load_matrix, sample_constraints, synth_instance
from .estimator import CONTEXTUAL, LOWRANK, EstimatorState, contains_truth, record_feedback
from .exceptions import ConfigError
from .market import ConstraintProfile, RewardMatrix, RoundFeedback, acceptance_mask, realized_welfare
from .metrics import RoundRecord, aggregate, rejections, round_instability
from .ofu import nu_default
from .policies import ALGORITHMS, ILAP_CX, ILAP_LR, Action, Policy, RadiusParams, make_policy
from .rng import CONSTRAINTS, INSTANCE, POLICY, noise_matrix, stream

SYNTHETIC = "synthetic"
AUTO = "auto"
RECORD_COLUMNS = ("t", "welfare", "optimal_welfare", "regret", "cum_regret", "instability", "cum_instability", "rejections", "width")
AGGREGATE_COLUMNS = ("t", "regret_mean", "regret_std", "instability_mean", "instability_std")
COMPARE_COLUMNS = ("algorithm", "cum_regret_mean", "cum_regret_std", "cum_instability_mean", "cum_instability_std")
# fields that must agree for configs to share instance, constraint and noise streams
ENV_FIELDS = ("setting", "accept_reject", "N", "M", "R", "T", "eta", "seeds", "data")


@dataclass(frozen=True)
class ExperimentConfig:
    algorithm: str
    setting: str = STATIC
    accept_reject: bool = False
    N: int = 10
    M: int = 5
    R: int = 2
    T: int = 100
    eta: float = 0.2
    gamma: float = 1.0
    delta: float = 0.05
    alpha: float | str = AUTO
    nu: float | str = AUTO
    G: float | str = AUTO
    seeds: tuple[int, ...] = (0,)
    data: str = SYNTHETIC
    features: str = "known"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {', '.join(ALGORITHMS)}; got {self.algorithm!r}")
        if self.setting not in ("static", "dynamic"):
            raise ConfigError(f"setting must be static or dynamic; got {self.setting!r}")
        if self.features not in ("known", "unknown"):
            raise ConfigError("features must be known or unknown")
        if min(self.N, self.M, self.R, self.T) < 1:
            raise ConfigError("N, M, R and T must be >= 1")
        if self.gamma < 1:
            raise ConfigError("gamma must be >= 1")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        if self.alpha != AUTO and not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.nu != AUTO and self.nu < 0:
            raise ConfigError("nu must be nonnegative")
        if self.G != AUTO and self.G < 0:
            raise ConfigError("G must be nonnegative")
        if self.eta < 0:
            raise ConfigError("eta must be nonnegative")
        if not self.seeds:
            raise ConfigError("at least one seed is required")

    @property
    def mode(self) -> str:
        """Estimator model: item features are unknown for the low-rank variant."""
        if self.algorithm == ILAP_LR or (self.algorithm != ILAP_CX and self.features == "unknown"):
            return LOWRANK
        return CONTEXTUAL

    @property
    def alpha_value(self) -> float:
        return 1.0 / (self.N * self.M * self.T) if self.alpha == AUTO else float(self.alpha)

    def replace(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _real_or_auto(text: str):
    return AUTO if text.lower() == AUTO else float(text)


_PARSERS = {
    "algorithm": str.lower,
    "setting": str.lower,
    "accept_reject": _parse_bool,
    "N": int,
    "M": int,
    "R": int,
    "T": int,
    "eta": float,
    "gamma": float,
    "delta": float,
    "alpha": _real_or_auto,
    "nu": _real_or_auto,
    "G": _real_or_auto,
    "seeds": lambda s: tuple(int(x) for x in s.replace(",", " ").split()),
    "data": str,
    "features": str.lower,
}


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        if key not in _PARSERS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    if "algorithm" not in values:
        raise ConfigError(f"{source}: missing required key 'algorithm'")
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))


class Environment:
    """True rewards, constraint draws and reward noise for one seed.

    Everything here depends only on the seed and the environment fields of the
    config, so every algorithm run on the same seed sees the same draws.
    """

    def __init__(self, config: ExperimentConfig, seed: int):
        self.config = config
        self.seed = int(seed)
        if config.data == SYNTHETIC:
            truth = synth_instance(config.N, config.M, config.R, stream(seed, INSTANCE))
        else:
            truth = load_matrix(config.data)
            if truth.shape != (config.N, config.M):
                raise ConfigError(f"matrix {config.data} has shape {truth.shape}, config says {(config.N, config.M)}")
        self.truth: RewardMatrix = truth
        if truth.item_features is not None:
            self.item_features = truth.item_features
        else:
            self.item_features = balanced_factors(truth.values, config.R)[1]
        self._static = None
        self._optimum: dict[bytes, float] = {}

    @property
    def shape(self) -> tuple[int, int]:
        return self.truth.shape

    def constraints(self, t: int) -> ConstraintProfile:
        cfg = self.config
        if cfg.setting == STATIC:
            if self._static is None:
                self._static = sample_constraints(STATIC, cfg.N, cfg.M, stream(self.seed, CONSTRAINTS), 1)
            return self._static
        return sample_constraints(cfg.setting, cfg.N, cfg.M, stream(self.seed, CONSTRAINTS, t), t)

    def optimum(self, constraints: ConstraintProfile) -> float:
        key = constraints.demands.tobytes() + b"|" + constraints.capacities.tobytes()
        if key not in self._optimum:
            self._optimum[key] = solve_allocation(self.truth.values, constraints).welfare
        return self._optimum[key]

    def feedback(self, action: Action, t: int) -> RoundFeedback:
        """Noisy rewards for kept pairs and zeros for pairs a policy lost to capacity."""
        z = noise_matrix(self.seed, t, self.shape)
        R = self.truth.values + self.config.eta * z
        accept = acceptance_mask(self.truth, action.prices)
        rewards = {(u, i): float(R[u, i]) for u, i in action.allocation.pairs}
        accepted = {(u, i): bool(accept[u, i]) for u, i in action.allocation.pairs}
        for pair in action.eliminated:
            rewards[pair] = 0.0
        return RoundFeedback(rewards, accepted)


def default_G(truth: RewardMatrix, mode: str = LOWRANK) -> float:
    """Distance bound from the zero prior: whole matrix for the low-rank set,
    one user row for the per-user contextual sets."""
    N, M = truth.shape
    top = float(np.abs(truth.values).max(initial=0.0))
    return math.sqrt(M) * top if mode == CONTEXTUAL else math.sqrt(N * M) * top


def max_active_users(env: Environment) -> int:
    return max(int(env.constraints(t).active_users.size) for t in range(1, env.config.T + 1))


def build_policy(config: ExperimentConfig, env: Environment) -> Policy:
    N, M = env.shape
    mode = config.mode
    G = default_G(env.truth, mode) if config.G == AUTO else float(config.G)
    state = EstimatorState.fresh(
        (N, M), gamma=config.gamma, G=G, mode=mode, rank=config.R,
        item_features=env.item_features if mode == CONTEXTUAL else None,
    )
    radius = RadiusParams(config.delta, config.alpha_value, config.eta, config.R)
    nu = 0.0
    if config.algorithm in (ILAP_CX, ILAP_LR):
        if config.nu != AUTO:
            nu = float(config.nu)
        elif config.accept_reject:
            radius_T = radius.spec(mode, config.T, state).radius
            nu = nu_default(mode, radius_T, max(max_active_users(env), 1) if mode == CONTEXTUAL else N, M)
    rng = stream(env.seed, f"{POLICY}:{config.algorithm}")
    return make_policy(config.algorithm, state, radius=radius, nu=nu, truth=env.truth, rng=rng)


def run_round(policy: Policy, env: Environment, t: int) -> tuple[RoundRecord, Action, RoundFeedback]:
    """Decide, offer, observe and score one round.

    Coverage is judged on the estimate the decision used, before the new
    observations are recorded.
    """
    accept_reject = env.config.accept_reject
    constraints = env.constraints(t)
    action = policy.act(t, constraints)
    feedback = env.feedback(action, t)

    covered = None
    if action.confidence is not None:
        covered = contains_truth(policy.state, action.confidence, env.truth)
    optimum = env.optimum(constraints)
    welfare = realized_welfare(action.allocation, env.truth, action.prices, accept_reject)
    regret = optimum - welfare
    assert regret >= -1e-8, f"negative regret {regret} at round {t}"
    record = RoundRecord(
        t=t,
        welfare=welfare,
        optimal_welfare=optimum,
        regret=regret,
        instability=round_instability(action.allocation, action.prices, env.truth, constraints, accept_reject),
        rejections=rejections(action.allocation, action.prices, env.truth) if accept_reject else 0,
        width=action.width,
        optimistic_value=action.optimistic_value,
        covered=covered,
    )
    policy.observe(action, feedback)
    return record, action, feedback


@dataclass
class RunResult:
    config: ExperimentConfig
    seed: int
    records: list[RoundRecord]
    coverage_held: bool | None
    policy: Policy = field(repr=False)
    log: list[tuple[Action, RoundFeedback]] = field(default_factory=list, repr=False)

    @property
    def cum_regret(self) -> float:
        return float(sum(r.regret for r in self.records))

    @property
    def cum_instability(self) -> float:
        return float(sum(r.instability for r in self.records))


def run_seed(config: ExperimentConfig, seed: int, keep_log: bool = True) -> RunResult:
    env = Environment(config, seed)
    policy = build_policy(config, env)
    records, log = [], []
    for t in range(1, config.T + 1):
        record, action, feedback = run_round(policy, env, t)
        records.append(record)
        if keep_log:
            log.append((action, feedback))
    flags = [r.covered for r in records if r.covered is not None]
    coverage = all(flags) if flags else None
    return RunResult(config, int(seed), records, coverage, policy, log)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".9g")


def _write_rows(path: Path, header, rows) -> None:
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_run_csv(path, result: RunResult) -> None:
    rows, cum_r, cum_i = [], 0.0, 0.0
    for r in result.records:
        cum_r += r.regret
        cum_i += r.instability
        rows.append((r.t, r.welfare, r.optimal_welfare, r.regret, cum_r, r.instability, cum_i, r.rejections, r.width))
    _write_rows(Path(path), RECORD_COLUMNS, rows)


def write_aggregate_csv(path, results) -> None:
    s = aggregate([r.records for r in results])
    rows = zip(s.t, s.regret_mean, s.regret_std, s.instability_mean, s.instability_std)
    _write_rows(Path(path), AGGREGATE_COLUMNS, rows)


def run_experiment(config: ExperimentConfig, out_dir=None, keep_log: bool = False) -> list[RunResult]:
    """Run every seed; with ``out_dir`` write one CSV per seed plus an aggregate CSV."""
    results = [run_seed(config, s, keep_log) for s in config.seeds]
    if out_dir is not None:
        out = Path(out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OSError(f"cannot create {out}: {exc.strerror or exc}") from exc
        for r in results:
            write_run_csv(out / f"{config.algorithm}_seed{r.seed}.csv", r)
        write_aggregate_csv(out / f"{config.algorithm}_aggregate.csv", results)
    return results


def check_shared_environment(configs) -> None:
    first = configs[0]
    for cfg in configs[1:]:
        diff = [f for f in ENV_FIELDS if getattr(cfg, f) != getattr(first, f)]
        if diff:
            raise ConfigError(f"configs for {first.algorithm} and {cfg.algorithm} differ in {', '.join(diff)}")


def compare(configs, out_dir=None) -> dict[str, list[RunResult]]:
    """Run configs that share instances and noise, and summarize final cumulative metrics."""
    configs = list(configs)
    if not configs:
        raise ConfigError("nothing to compare")
    check_shared_environment(configs)
    labels, results = [], {}
    for cfg in configs:
        label, k = cfg.algorithm, 2
        while label in results:
            label, k = f"{cfg.algorithm}#{k}", k + 1
        labels.append(label)
        results[label] = run_experiment(cfg, None if out_dir is None else Path(out_dir) / label.replace("#", "-"))
    if out_dir is not None:
        rows = []
        for label in labels:
            reg = np.array([r.cum_regret for r in results[label]])
            ins = np.array([r.cum_instability for r in results[label]])
            rows.append((label, reg.mean(), reg.std(), ins.mean(), ins.std()))
        path = Path(out_dir) / "compare.csv"
        try:
            with path.open("w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(COMPARE_COLUMNS)
                for label, *vals in rows:
                    writer.writerow([label, *(_fmt(v) for v in vals)])
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return results


def replay_state(result: RunResult) -> EstimatorState:
    """Rebuild the learner's statistics from the logged feedback alone."""
    s = result.policy.state
    fresh = EstimatorState.fresh(s.shape, gamma=s.gamma, G=s.G, mode=s.mode, rank=s.rank, item_features=s.item_features)
    for action, feedback in result.log:
        record_feedback(fresh, action.observed, feedback)
    return fresh

