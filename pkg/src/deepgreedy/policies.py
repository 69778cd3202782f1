"""Decision policies sharing one choose/observe/end_of_step interface.

``choose`` receives the step's :class:`~deepgreedy.environments.Oracle` so the
optimal baseline can act on it; every other policy ignores it.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .core import (
    MODEL_STREAM,
    Branch,
    ExperimentConfig,
    History,
    StepRecord,
    epsilon_value,
    select_action,
    stream_rng,
)
from .environments import Environment, Oracle
from .errors import InvalidArgumentError, InvariantViolationError, TrainingDivergedError
from .predictors import LinearModel, MlpModel, OraclePredictor

POLICY_NAMES = (
    "deep-eps-greedy",
    "simple-eps-greedy",
    "eps-greedy",
    "oracle-eps-greedy",
    "linucb",
    "linear",
    "random",
    "optimal",
)

DEEP_WIDTHS = (100, 100)
SIMPLE_WIDTHS = (100,)


class Policy:
    num_actions: int

    def choose(self, t: int, context: np.ndarray, oracle: Oracle, rng) -> tuple[int, Branch, float]:
        """Return ``(arm, branch, epsilon used)`` for step ``t``."""
        raise NotImplementedError

    def observe(self, record: StepRecord) -> None:
        pass

    def end_of_step(self, t: int, history: History) -> None:
        pass


class EpsilonGreedyPolicy(Policy):
    """Greedy on per-arm reward predictions, uniform exploration w.p. ``t**-p``.

    Predictor ``j`` is trained only on the steps where arm ``j`` was played,
    every ``retrain_period`` steps, warm-started from its current state.
    """

    def __init__(self, predictors, epsilon_exponent=1.0, retrain_period=20, train_rngs=None):
        if len(predictors) < 2:
            raise InvalidArgumentError("need a predictor for each of at least two arms")
        if retrain_period < 1:
            raise InvalidArgumentError("retrain_period must be >= 1")
        self.predictors = list(predictors)
        self.num_actions = len(self.predictors)
        self.epsilon_exponent = float(epsilon_exponent)
        self.retrain_period = int(retrain_period)
        if train_rngs is None:
            train_rngs = [np.random.default_rng(j) for j in range(self.num_actions)]
        self.train_rngs = list(train_rngs)

    def predictions(self, context) -> np.ndarray:
        return np.array([p.predict(context) for p in self.predictors])

    def choose(self, t, context, oracle, rng):
        eps = epsilon_value(t, self.epsilon_exponent)
        arm, branch, _ = select_action(self.predictions(context), eps, rng)
        return arm, branch, eps

    def end_of_step(self, t, history):
        if t % self.retrain_period:
            return
        for j, predictor in enumerate(self.predictors):
            if not history.index_sets[j] or not getattr(predictor, "trainable", True):
                continue
            X, y = history.training_set(j)
            try:
                predictor.fit(X, y, self.train_rngs[j])
            except TrainingDivergedError as exc:
                raise TrainingDivergedError(f"arm {j + 1} at t={t}: {exc}") from exc


class LinUCBPolicy(Policy):
    """Disjoint LinUCB: ``theta_j . x + alpha * sqrt(x' B_j^-1 x)``, ``B_j = I + sum x x'``."""

    def __init__(self, num_actions, context_dim, alpha=1.0):
        self.num_actions = int(num_actions)
        self.context_dim = int(context_dim)
        self.alpha = float(alpha)
        self.B = [np.eye(self.context_dim) for _ in range(self.num_actions)]
        self.b = [np.zeros(self.context_dim) for _ in range(self.num_actions)]

    def score(self, arm, x) -> float:
        x = np.asarray(x, dtype=float)
        try:
            factor = scipy.linalg.cho_factor(self.B[arm])
        except np.linalg.LinAlgError as exc:
            raise InvariantViolationError(f"B for arm {arm + 1} is not positive definite") from exc
        theta = scipy.linalg.cho_solve(factor, self.b[arm])
        width = x @ scipy.linalg.cho_solve(factor, x)
        return float(theta @ x + self.alpha * np.sqrt(max(width, 0.0)))

    def update(self, arm, x, reward) -> None:
        x = np.asarray(x, dtype=float)
        self.B[arm] += np.outer(x, x)
        self.b[arm] += reward * x

    def choose(self, t, context, oracle, rng):
        scores = [self.score(j, context) for j in range(self.num_actions)]
        return int(np.argmax(scores)), Branch.GREEDY, 0.0

    def observe(self, record):
        self.update(record.action, record.context, record.reward)


class LinearPolicy(Policy):
    """Pure greedy on per-arm least-squares fits, refit after every step."""

    def __init__(self, num_actions, context_dim, ridge=1e-8):
        self.num_actions = int(num_actions)
        self.models = [LinearModel(context_dim, ridge) for _ in range(self.num_actions)]

    def choose(self, t, context, oracle, rng):
        preds = [m.predict(context) for m in self.models]
        return int(np.argmax(preds)), Branch.GREEDY, 0.0

    def observe(self, record):
        self.models[record.action].update(record.context, record.reward)


class RandomPolicy(Policy):
    def __init__(self, num_actions):
        self.num_actions = int(num_actions)

    def choose(self, t, context, oracle, rng):
        return int(rng.integers(self.num_actions)), Branch.EXPLORE, 1.0


class OptimalPolicy(Policy):
    def __init__(self, num_actions):
        self.num_actions = int(num_actions)

    def choose(self, t, context, oracle, rng):
        return oracle.optimal_arm, Branch.GREEDY, 0.0


def make_policy(name: str, config: ExperimentConfig, env: Environment) -> Policy:
    """Build a named policy; model randomness comes from ``config.rng_seed``."""
    K, m = env.num_actions, env.context_dim
    seed = config.rng_seed
    if name in ("deep-eps-greedy", "simple-eps-greedy", "eps-greedy"):
        widths = {
            "deep-eps-greedy": DEEP_WIDTHS,
            "simple-eps-greedy": SIMPLE_WIDTHS,
            "eps-greedy": config.hidden_widths,
        }[name]
        rngs = [stream_rng(seed, MODEL_STREAM, j) for j in range(K)]
        predictors = [
            MlpModel(
                m,
                widths,
                rng=rngs[j],
                epochs=config.train_epochs,
                learning_rate=config.learning_rate,
                batch_size=config.batch_size,
            )
            for j in range(K)
        ]
        return EpsilonGreedyPolicy(
            predictors, config.epsilon_exponent, config.retrain_period, train_rngs=rngs
        )
    if name == "oracle-eps-greedy":
        predictors = [OraclePredictor(env.mean_function(j), m) for j in range(K)]
        return EpsilonGreedyPolicy(predictors, config.epsilon_exponent, config.retrain_period)
    if name == "linucb":
        return LinUCBPolicy(K, m, config.linucb_alpha)
    if name == "linear":
        return LinearPolicy(K, m, config.ridge)
    if name == "random":
        return RandomPolicy(K)
    if name == "optimal":
        return OptimalPolicy(K)
    raise InvalidArgumentError(f"unknown policy {name!r}; choose from {', '.join(POLICY_NAMES)}")
