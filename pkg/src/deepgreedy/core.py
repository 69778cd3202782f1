"""Shared types, the exploration schedule, and per-step bookkeeping.

Arms are 0-based inside the library (``range(K)``); time steps are 1-based
(``t = 1, ..., M``) so that sums such as ``sum_{l=1}^{t-1}`` read the same in
code as in the math. CSV output converts arms to 1-based.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ConfigError, InvalidArgumentError, InvalidStateError

# Named RNG streams. A stream generator is a pure function of (seed, stream id[, sub id]).
ENV_STREAM = 0
NOISE_STREAM = 1
POLICY_STREAM = 2
MODEL_STREAM = 3
SIM_STREAM = 4


def stream_rng(seed: int, stream: int, *sub: int) -> np.random.Generator:
    """Deterministic generator for one named consumer of randomness.

    Replicate ``r`` of a batch started at ``seed`` runs with seed ``seed + r``,
    so any single replicate can be reproduced on its own.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), *map(int, sub)))
    return np.random.default_rng(ss)


class Branch(str, enum.Enum):
    GREEDY = "GREEDY"
    EXPLORE = "EXPLORE"


@dataclass(frozen=True)
class ExperimentConfig:
    total_steps: int = 2000
    num_actions: int = 5
    context_dim: int | None = None  # None: taken from the environment
    epsilon_exponent: float = 1.0
    retrain_period: int = 20
    train_epochs: int = 16
    learning_rate: float = 1e-3
    batch_size: int = 32
    noise_sigma: float = 0.0
    rng_seed: int = 0
    hidden_widths: tuple[int, ...] = (100,)
    ridge: float = 1e-8
    linucb_alpha: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(h) for h in self.hidden_widths))
        if self.total_steps < 1:
            raise ConfigError(f"total_steps must be >= 1, got {self.total_steps}")
        if self.num_actions < 2:
            raise ConfigError(f"num_actions must be >= 2, got {self.num_actions}")
        if self.context_dim is not None and self.context_dim < 1:
            raise ConfigError(f"context_dim must be positive, got {self.context_dim}")
        if not self.epsilon_exponent > 0:
            raise ConfigError(f"epsilon_exponent must be > 0, got {self.epsilon_exponent}")
        if self.retrain_period < 1:
            raise ConfigError(f"retrain_period must be >= 1, got {self.retrain_period}")
        if self.train_epochs < 1:
            raise ConfigError(f"train_epochs must be >= 1, got {self.train_epochs}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.noise_sigma >= 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not 0 <= self.rng_seed < 2**64:
            raise ConfigError(f"rng_seed must fit in 64 unsigned bits, got {self.rng_seed}")
        if any(h < 1 for h in self.hidden_widths):
            raise ConfigError(f"hidden widths must be positive, got {self.hidden_widths}")
        if self.ridge < 0:
            raise ConfigError(f"ridge must be >= 0, got {self.ridge}")

    def with_seed(self, seed: int) -> ExperimentConfig:
        return replace(self, rng_seed=seed)


@dataclass(frozen=True)
class ExplorationDraw:
    eta: float
    rho: int | None = None


@dataclass(frozen=True)
class StepRecord:
    t: int
    context: np.ndarray
    action: int
    branch: Branch
    epsilon: float
    reward: float
    optimal_mean: float
    instant_regret: float


@dataclass
class History:
    """Everything the bandit loop has seen so far.

    ``index_sets[j]`` holds the 1-based time steps at which arm ``j`` was
    pulled, ``pulls[j]`` their count and ``explore_pulls[j]`` the subset that
    came from the uniform exploration branch.
    """

    num_actions: int
    records: list[StepRecord] = field(default_factory=list)
    index_sets: list[list[int]] = field(init=False)
    pulls: np.ndarray = field(init=False)
    explore_pulls: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.num_actions < 1:
            raise InvalidArgumentError("History needs at least one arm")
        pending, self.records = self.records, []
        self.index_sets = [[] for _ in range(self.num_actions)]
        self.pulls = np.zeros(self.num_actions, dtype=np.int64)
        self.explore_pulls = np.zeros(self.num_actions, dtype=np.int64)
        for rec in pending:
            self.append(rec)

    def __len__(self):
        return len(self.records)

    def append(self, record: StepRecord) -> None:
        if record.t != len(self.records) + 1:
            raise InvalidStateError(
                f"expected step t={len(self.records) + 1}, got t={record.t}"
            )
        if not 0 <= record.action < self.num_actions:
            raise InvalidArgumentError(f"arm {record.action} out of range [0, {self.num_actions})")
        self.records.append(record)
        self.index_sets[record.action].append(record.t)
        self.pulls[record.action] += 1
        if record.branch is Branch.EXPLORE:
            self.explore_pulls[record.action] += 1

    def training_set(self, arm: int) -> tuple[np.ndarray, np.ndarray]:
        """Contexts and rewards of every step at which ``arm`` was pulled."""
        idx = self.index_sets[arm]
        if not idx:
            return np.empty((0, 0)), np.empty(0)
        X = np.stack([self.records[t - 1].context for t in idx])
        y = np.array([self.records[t - 1].reward for t in idx])
        return X, y

    def rewards(self) -> np.ndarray:
        return np.array([r.reward for r in self.records], dtype=float)

    def optimal_means(self) -> np.ndarray:
        return np.array([r.optimal_mean for r in self.records], dtype=float)

    def instant_regrets(self) -> np.ndarray:
        return np.array([r.instant_regret for r in self.records], dtype=float)


def record_step(history: History, record: StepRecord) -> History:
    history.append(record)
    return history


def epsilon_value(t: int, p: float) -> float:
    """Exploration probability ``min(1, t**-p)`` at 1-based step ``t``."""
    if t < 1:
        raise InvalidArgumentError(f"t must be >= 1, got {t}")
    if not p > 0:
        raise InvalidArgumentError(f"p must be > 0, got {p}")
    return min(1.0, math.exp(-p * math.log(t)))


def select_action(
    predictions: Sequence[float], epsilon: float, rng: np.random.Generator
) -> tuple[int, Branch, ExplorationDraw]:
    """Epsilon-greedy choice over ``predictions``.

    Greedy iff ``eta > epsilon`` with ``eta ~ U[0, 1)``; ``epsilon == 0`` is
    always greedy. Argmax ties resolve to the lowest index.
    """
    preds = np.asarray(predictions, dtype=float)
    if preds.ndim != 1 or preds.size < 2:
        raise InvalidArgumentError("need a vector of at least two predictions")
    if not 0.0 <= epsilon <= 1.0:
        raise InvalidArgumentError(f"epsilon must lie in [0, 1], got {epsilon}")
    eta = float(rng.random())
    if eta > epsilon or epsilon == 0.0:
        return int(np.argmax(preds)), Branch.GREEDY, ExplorationDraw(eta)
    rho = int(rng.integers(preds.size))
    return rho, Branch.EXPLORE, ExplorationDraw(eta, rho)


def normalized_reward_trace(history: History | Sequence[float]) -> np.ndarray:
    """Running mean of rewards: element ``t-1`` is ``sum_{s<=t} R_s / t``."""
    rewards = history.rewards() if isinstance(history, History) else np.asarray(history, float)
    if rewards.size == 0:
        raise InvalidArgumentError("empty history has no reward trace")
    return np.cumsum(rewards) / np.arange(1, rewards.size + 1)


def regret_trace(method_trace, optimal_trace) -> np.ndarray:
    """Pointwise ``optimal - method`` of two normalized traces.

    ``method_trace`` may be a History, in which case its normalized reward
    trace is used.
    """
    if isinstance(method_trace, History):
        method_trace = normalized_reward_trace(method_trace)
    method = np.asarray(method_trace, dtype=float)
    optimal = np.asarray(optimal_trace, dtype=float)
    if method.shape != optimal.shape:
        raise InvalidArgumentError(
            f"trace lengths differ: {method.shape} vs {optimal.shape}"
        )
    return optimal - method
