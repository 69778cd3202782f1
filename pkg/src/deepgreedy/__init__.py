"""Epsilon-greedy contextual bandits with neural reward models, plus regret-bound tooling."""

from .core import Branch, ExperimentConfig, History, StepRecord, select_action, stream_rng
from .environments import CodebookEnv, GapEnv, LinearEnv, MnistEnv, Oracle, expected_optimal_mean
from .errors import (
    ConfigError,
    DeepGreedyError,
    DomainError,
    IdxFormatError,
    InvalidArgumentError,
    InvariantViolationError,
    TrainingDivergedError,
)
from .harness import EnvSpec, run_replicates, run_single
from .predictors import LinearModel, MlpModel
from .theory import TheoryParams, optimal_exponent, regret_lower_bound, regret_upper_bound

__version__ = "0.1.0"

__all__ = [
    "Branch", "ExperimentConfig", "History", "StepRecord", "select_action", "stream_rng",
    "CodebookEnv", "GapEnv", "LinearEnv", "MnistEnv", "Oracle", "expected_optimal_mean",
    "ConfigError", "DeepGreedyError", "DomainError", "IdxFormatError", "InvalidArgumentError",
    "InvariantViolationError", "TrainingDivergedError",
    "EnvSpec", "run_replicates", "run_single",
    "LinearModel", "MlpModel",
    "TheoryParams", "optimal_exponent", "regret_lower_bound", "regret_upper_bound",
]
