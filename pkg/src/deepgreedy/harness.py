"""Experiment orchestration: runs, replicate summaries, Monte-Carlo checks, CSV I/O.

Seeding: replicate ``r`` of a batch seeded with ``s`` runs with seed ``s + r``;
within a run each consumer (contexts, reward noise, policy draws, each arm's
network) owns ``stream_rng(seed, stream_id[, arm])``.
"""

from __future__ import annotations

import csv
import functools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .core import (
    ENV_STREAM,
    NOISE_STREAM,
    POLICY_STREAM,
    ExperimentConfig,
    History,
    StepRecord,
    epsilon_value,
    normalized_reward_trace,
    stream_rng,
)
from .environments import CodebookEnv, Environment, GapEnv, LinearEnv, MnistEnv
from .errors import ConfigError, DomainError, InvalidArgumentError, TrainingDivergedError
from .mnist import load_idx_pair, pool_images
from .policies import POLICY_NAMES, make_policy
from .theory import lemma_probability_bound, lemma_threshold

log = logging.getLogger(__name__)

ENV_NAMES = ("codebook", "linear", "mnist", "gap")

RUN_COLUMNS = (
    "t",
    "action",
    "branch",
    "epsilon",
    "reward",
    "normalized_reward",
    "optimal_mean",
    "instant_regret",
    "cumulative_regret",
)
SUMMARY_COLUMNS = (
    "t",
    "mean_normalized_reward",
    "stderr_normalized_reward",
    "mean_regret",
    "stderr_regret",
    "replicates",
)


@dataclass(frozen=True)
class EnvSpec:
    name: str = "codebook"
    images_path: str | None = None
    labels_path: str | None = None
    pool_factor: int = 4
    gap: float = 1.0

    def __post_init__(self):
        if self.name not in ENV_NAMES:
            raise ConfigError(f"unknown env {self.name!r}; choose from {', '.join(ENV_NAMES)}")


@functools.lru_cache(maxsize=4)
def _mnist_pool(images_path, labels_path, pool_factor):
    images, labels = load_idx_pair(images_path, labels_path)
    return pool_images(images, pool_factor), labels.labels


def build_env(config: ExperimentConfig, spec: EnvSpec) -> Environment:
    K, sigma = config.num_actions, config.noise_sigma
    if spec.name == "codebook":
        env = CodebookEnv(K, sigma)
    elif spec.name == "linear":
        m = config.context_dim or 10
        env = LinearEnv.random(K, m, sigma, stream_rng(config.rng_seed, ENV_STREAM, 1))
    elif spec.name == "gap":
        env = GapEnv(K, spec.gap, sigma)
    else:
        if not (spec.images_path and spec.labels_path):
            raise ConfigError("the mnist env needs images_path and labels_path")
        features, labels = _mnist_pool(spec.images_path, spec.labels_path, spec.pool_factor)
        env = MnistEnv(features, labels, K, sigma)
    if config.context_dim is not None and config.context_dim != env.context_dim:
        raise ConfigError(
            f"context_dim={config.context_dim} but the {spec.name} env produces {env.context_dim}"
        )
    return env


@dataclass
class RunResult:
    config: ExperimentConfig
    env: str
    policy: str
    history: History
    normalized_reward: np.ndarray
    regret: np.ndarray
    optimal_mean: np.ndarray
    wall_time: float
    error: str | None = None

    @property
    def seed(self) -> int:
        return self.config.rng_seed

    @property
    def completed(self) -> bool:
        return self.error is None and len(self.history) == self.config.total_steps


def _traces(history: History):
    if not len(history):
        empty = np.empty(0)
        return empty, empty, empty
    steps = np.arange(1, len(history) + 1)
    reward = normalized_reward_trace(history)
    optimal = np.cumsum(history.optimal_means()) / steps
    regret = np.cumsum(history.instant_regrets()) / steps
    return reward, regret, optimal


def run_single(config: ExperimentConfig, env_spec: EnvSpec | str, policy: str) -> RunResult:
    """Play ``config.total_steps`` steps of one policy in one environment.

    The regret trace is ``(1/t) sum_{s<=t} (mu_*(X_s) - mu_{D_s}(X_s))``. A
    diverging network stops the run early; the partial trace is kept and
    ``error`` is set.
    """
    if isinstance(env_spec, str):
        env_spec = EnvSpec(env_spec)
    env = build_env(config, env_spec)
    pol = make_policy(policy, config, env)
    seed = config.rng_seed
    env_rng = stream_rng(seed, ENV_STREAM)
    noise_rng = stream_rng(seed, NOISE_STREAM)
    policy_rng = stream_rng(seed, POLICY_STREAM)
    history = History(env.num_actions)
    error = None
    start = time.perf_counter()
    for t in range(1, config.total_steps + 1):
        x, oracle = env.sample_context(env_rng)
        arm, branch, eps = pol.choose(t, x, oracle, policy_rng)
        reward = env.draw_reward(oracle, arm, noise_rng)
        record = StepRecord(
            t, x, arm, branch, eps, reward, oracle.optimal_mean, oracle.gap(arm)
        )
        history.append(record)
        pol.observe(record)
        try:
            pol.end_of_step(t, history)
        except TrainingDivergedError as exc:
            error = f"training diverged: {exc}"
            log.warning("seed %d: %s", seed, error)
            break
    reward_tr, regret_tr, optimal_tr = _traces(history)
    return RunResult(
        config, env_spec.name, policy, history, reward_tr, regret_tr, optimal_tr,
        time.perf_counter() - start, error,
    )


@dataclass
class ReplicateSummary:
    mean_normalized_reward: np.ndarray
    stderr_normalized_reward: np.ndarray
    mean_regret: np.ndarray
    stderr_regret: np.ndarray
    seeds: list[int]
    failures: dict[int, str] = field(default_factory=dict)

    @property
    def replicates(self) -> int:
        return len(self.seeds)


def _stderr(a: np.ndarray) -> np.ndarray:
    if a.shape[0] < 2:
        return np.zeros(a.shape[1])
    return a.std(axis=0, ddof=1) / math.sqrt(a.shape[0])


def summarize(results: list[RunResult]) -> ReplicateSummary:
    ok = [r for r in results if r.completed]
    failures = {r.seed: r.error or "incomplete" for r in results if not r.completed}
    if not ok:
        raise InvalidArgumentError(f"no replicate completed: {failures}")
    rewards = np.stack([r.normalized_reward for r in ok])
    regrets = np.stack([r.regret for r in ok])
    return ReplicateSummary(
        rewards.mean(axis=0),
        _stderr(rewards),
        regrets.mean(axis=0),
        _stderr(regrets),
        [r.seed for r in ok],
        failures,
    )


def _run_seed(args):
    config, env_spec, policy = args
    return run_single(config, env_spec, policy)


def run_replicates(
    config: ExperimentConfig,
    env_spec: EnvSpec | str,
    policy: str,
    replicates: int = 12,
    parallelism: int = 1,
) -> tuple[ReplicateSummary, list[RunResult]]:
    """Independent runs with seeds ``seed, seed+1, ...``; merged in seed order."""
    if replicates < 1:
        raise InvalidArgumentError("replicates must be >= 1")
    if isinstance(env_spec, str):
        env_spec = EnvSpec(env_spec)
    jobs = [(config.with_seed(config.rng_seed + r), env_spec, policy) for r in range(replicates)]
    if parallelism > 1 and replicates > 1:
        with ProcessPoolExecutor(max_workers=min(parallelism, replicates)) as pool:
            results = list(pool.map(_run_seed, jobs))
    else:
        results = [_run_seed(job) for job in jobs]
    return summarize(results), results


@dataclass(frozen=True)
class LemmaCheck:
    empirical: float
    bound: float | None
    threshold: float
    margin: float | None
    passed: bool | None
    vacuous: bool
    mean_pulls: np.ndarray
    replicates: int


def simulate_exploration_counts(
    K: int, p: float, t: int, replicates: int, rng: np.random.Generator, chunk: int = 4_000_000
) -> np.ndarray:
    """Exploration pulls per arm over steps ``1..t-1``, shape ``(replicates, K)``.

    Only the uniform branch is simulated: at step ``l`` the policy explores
    with probability ``eps_l`` and then picks one of ``K`` arms uniformly.
    """
    counts = np.zeros((replicates, K), dtype=np.int64)
    width = max(1, chunk // max(replicates, 1))
    for lo in range(1, t, width):
        hi = min(t, lo + width)
        eps = np.array([epsilon_value(l, p) for l in range(lo, hi)])
        explore = rng.random((replicates, hi - lo)) <= eps
        rows = np.nonzero(explore)[0]
        arms = rng.integers(K, size=rows.size)
        np.add.at(counts, (rows, arms), 1)
    return counts


def monte_carlo_lemma_check(
    K: int,
    p: float,
    t: int,
    replicates: int,
    rng: np.random.Generator,
    threshold: float | None = None,
) -> LemmaCheck:
    """Empirical P(min_i T^R_i(t) >= threshold) against the lemma's lower bound.

    Passes iff ``empirical >= bound - 4 sqrt(bound (1 - bound) / replicates)``;
    a nonpositive bound passes vacuously. For ``p > 1`` there is no bound and a
    ``threshold`` must be given.
    """
    bound = None
    if 0 < p <= 1:
        bound = lemma_probability_bound(t, K, p)
        if threshold is None:
            threshold = lemma_threshold(t, K, p)
    elif threshold is None:
        raise InvalidArgumentError(f"p={p} has no lemma threshold; pass one explicitly")
    counts = simulate_exploration_counts(K, p, t, replicates, rng)
    empirical = float(np.mean(counts.min(axis=1) >= threshold))
    margin = passed = None
    vacuous = bound is not None and bound <= 0
    if bound is not None:
        b = min(max(bound, 0.0), 1.0)
        margin = 4 * math.sqrt(b * (1 - b) / replicates)
        passed = vacuous or empirical >= bound - margin
    return LemmaCheck(
        empirical, bound, float(threshold), margin, passed, vacuous,
        counts.mean(axis=0), replicates,
    )


def fit_loglog_slope(trace, t_min: int, t_max: int) -> float:
    """OLS slope of ``ln trace[t]`` on ``ln t`` for 1-based ``t`` in ``[t_min, t_max]``."""
    trace = np.asarray(trace, dtype=float)
    if not 1 <= t_min < t_max <= trace.size:
        raise InvalidArgumentError(f"range [{t_min}, {t_max}] invalid for a trace of length {trace.size}")
    t = np.arange(t_min, t_max + 1)
    y = trace[t_min - 1:t_max]
    if np.any(y <= 0):
        bad = t[np.argmax(y <= 0)]
        raise DomainError(f"trace is nonpositive at t={bad}; shift the fitting range")
    slope, _ = np.polyfit(np.log(t), np.log(y), 1)
    return float(slope)


def _fmt(x) -> str:
    return format(float(x), ".17g")


def emit_run_csv(result: RunResult, path) -> Path:
    path = Path(path)
    regret_cum = np.cumsum(result.history.instant_regrets())
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RUN_COLUMNS)
            for i, rec in enumerate(result.history.records):
                w.writerow([
                    rec.t, rec.action + 1, rec.branch.value, _fmt(rec.epsilon), _fmt(rec.reward),
                    _fmt(result.normalized_reward[i]), _fmt(rec.optimal_mean),
                    _fmt(rec.instant_regret), _fmt(regret_cum[i]),
                ])
            if result.error:
                fh.write(f"# error: {result.error}\n")
    except OSError as exc:
        raise OSError(f"cannot write run CSV {path}: {exc}") from exc
    return path


def emit_summary_csv(summary: ReplicateSummary, path) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUMMARY_COLUMNS)
            for i in range(summary.mean_regret.size):
                w.writerow([
                    i + 1,
                    _fmt(summary.mean_normalized_reward[i]),
                    _fmt(summary.stderr_normalized_reward[i]),
                    _fmt(summary.mean_regret[i]),
                    _fmt(summary.stderr_regret[i]),
                    summary.replicates,
                ])
            for seed, err in sorted(summary.failures.items()):
                fh.write(f"# failed seed {seed}: {err}\n")
    except OSError as exc:
        raise OSError(f"cannot write summary CSV {path}: {exc}") from exc
    return path


def emit_csv(result, path) -> Path:
    if isinstance(result, ReplicateSummary):
        return emit_summary_csv(result, path)
    return emit_run_csv(result, path)


def load_csv(path) -> dict[str, np.ndarray]:
    """Read a run or summary CSV back into columns (``branch`` stays text)."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise InvalidArgumentError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    cols = {}
    for j, name in enumerate(header):
        values = [r[j] for r in body]
        if name == "branch":
            cols[name] = np.array(values)
        elif name in ("t", "action", "replicates") and all(v.lstrip("-").isdigit() for v in values):
            cols[name] = np.array(values, dtype=np.int64)
        else:
            cols[name] = np.array(values, dtype=float)
    return cols


def regret_column(cols: dict[str, np.ndarray]) -> np.ndarray:
    """Normalized regret trace from either CSV schema."""
    if "mean_regret" in cols:
        return cols["mean_regret"]
    if "cumulative_regret" in cols:
        return cols["cumulative_regret"] / cols["t"]
    raise InvalidArgumentError("CSV has neither mean_regret nor cumulative_regret")


_CONFIG_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_ENV_KEYS = {"env": "name", "images_path": "images_path", "labels_path": "labels_path",
             "pool_factor": "pool_factor", "gap": "gap"}
_INT_KEYS = {"total_steps", "num_actions", "context_dim", "retrain_period", "train_epochs",
             "batch_size", "rng_seed", "pool_factor"}
_FLOAT_KEYS = {"epsilon_exponent", "learning_rate", "noise_sigma", "ridge", "linucb_alpha", "gap"}


def _parse_value(key, raw, lineno):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key == "hidden_widths":
            items = raw.strip().strip("[]()").replace(",", " ").split()
            return tuple(int(v) for v in items)
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {key}", line=lineno) from None
    return raw


def parse_config(text: str) -> tuple[ExperimentConfig, EnvSpec, str]:
    """Parse flat ``key = value`` text; ``#`` starts a comment."""
    cfg, env, policy = {}, {}, "deep-eps-greedy"
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", line=lineno)
        key, raw = (s.strip() for s in line.split("=", 1))
        if not raw:
            raise ConfigError(f"missing value for {key}", line=lineno)
        if key == "policy":
            if raw not in POLICY_NAMES:
                raise ConfigError(f"unknown policy {raw!r}", line=lineno)
            policy = raw
        elif key in _ENV_KEYS:
            env[_ENV_KEYS[key]] = _parse_value(key, raw, lineno)
        elif key in _CONFIG_FIELDS:
            cfg[key] = _parse_value(key, raw, lineno)
        else:
            raise ConfigError(f"unknown key {key!r}", line=lineno)
    return ExperimentConfig(**cfg), EnvSpec(**env), policy


def load_config(path) -> tuple[ExperimentConfig, EnvSpec, str]:
    return parse_config(Path(path).read_text())
