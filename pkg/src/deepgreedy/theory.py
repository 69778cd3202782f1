"""Closed-form regret bounds and exploration-count concentration for eps_t = t**-p.

The network constants ``C_i`` and minimal sample sizes ``n_i`` that enter the
bounds are not derivable from an architecture; callers supply them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DomainError, InvalidArgumentError


@dataclass(frozen=True)
class TheoryParams:
    num_actions: int
    epsilon_exponent: float
    min_gap: float
    constants: Sequence[float]
    min_sizes: Sequence[int] | None = None
    max_gap: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "constants", tuple(float(c) for c in self.constants))
        if self.min_sizes is not None:
            object.__setattr__(self, "min_sizes", tuple(int(n) for n in self.min_sizes))
        if self.num_actions < 1:
            raise InvalidArgumentError("num_actions must be positive")
        if not self.epsilon_exponent > 0:
            raise InvalidArgumentError("epsilon_exponent must be positive")
        if not self.min_gap > 0:
            raise InvalidArgumentError("min_gap must be positive")
        if not self.constants or min(self.constants) <= 0:
            raise InvalidArgumentError("need at least one positive network constant")
        if self.max_gap < 0:
            raise InvalidArgumentError("max_gap must be nonnegative")

    @property
    def c0(self) -> float:
        """``8 sqrt(2) max C_i``, the constant of the eps_t = 1/t bound."""
        return 8.0 * math.sqrt(2.0) * max(self.constants)

    @property
    def c0_prime(self) -> float:
        """``8 sqrt(2 (1-p)) max C_i``, the constant of the p < 1 bound."""
        p = self.epsilon_exponent
        if p >= 1:
            raise DomainError(f"c0_prime needs p < 1, got p={p}")
        return 8.0 * math.sqrt(2.0 * (1.0 - p)) * max(self.constants)

    def with_exponent(self, p: float) -> TheoryParams:
        return TheoryParams(
            self.num_actions, p, self.min_gap, self.constants, self.min_sizes, self.max_gap
        )


def _check_lemma_args(t, K, p):
    if not 0 < p <= 1:
        raise InvalidArgumentError(f"the exploration lemma needs 0 < p <= 1, got p={p}")
    if t < 2:
        raise InvalidArgumentError(f"t must be >= 2, got {t}")
    if K < 1:
        raise InvalidArgumentError("K must be positive")


def expected_exploration_pulls(t: int, K: int, p: float) -> float:
    """``(1/K) sum_{l=1}^{t-1} l**-p``: mean exploration pulls of one arm before step t."""
    if t < 2:
        raise InvalidArgumentError(f"t must be >= 2, got {t}")
    if K < 1 or not p > 0:
        raise InvalidArgumentError("need K >= 1 and p > 0")
    ls = np.arange(1, int(t), dtype=float)
    return float(np.sum(ls ** -p) / K)


def lemma_threshold(t: float, K: int, p: float) -> float:
    _check_lemma_args(t, K, p)
    if p == 1:
        return math.log(t) / (2 * K)
    return t ** (1 - p) / (2 * (1 - p) * K)


def lemma_probability_bound(t: float, K: int, p: float) -> float:
    """Lower bound on P(every arm has reached the lemma threshold); may be negative."""
    _check_lemma_args(t, K, p)
    if p == 1:
        x = 3 * math.log(t) / (28 * K)
    else:
        x = 3 * t ** (1 - p) / (28 * (1 - p) * K)
    return 1.0 - math.exp(math.log(K) - x)


def min_valid_t(params: TheoryParams) -> float:
    """Step beyond which the regret bounds hold."""
    if not params.min_sizes:
        raise ConfigError("min_valid_t needs the network minimal sample sizes n_i")
    K, p = params.num_actions, params.epsilon_exponent
    scale = max(math.e, max(params.min_sizes))
    if p == 1:
        return math.exp(2 * K * scale)
    if p > 1:
        raise DomainError(f"no regret guarantee for p={p} > 1")
    return (2 * (1 - p) * K * scale) ** (1 / (1 - p))


def regret_lower_bound(params: TheoryParams, t: float) -> float:
    if t < 1:
        raise InvalidArgumentError(f"t must be >= 1, got {t}")
    return params.min_gap / (params.num_actions * t ** params.epsilon_exponent)


def regret_upper_bound(params: TheoryParams, t: float, check_t0: bool = True) -> float:
    """Upper bound on the expected instantaneous regret at step ``t``.

    Holds on the lemma's high-probability event. With ``check_t0=False`` the
    formula is evaluated below ``t_0`` too, as long as its radicand is positive.
    """
    K, p, delta = params.num_actions, params.epsilon_exponent, params.min_gap
    if p > 1:
        raise DomainError(f"no regret upper bound for p={p} > 1 (starvation)")
    if check_t0:
        t0 = min_valid_t(params)
        if not t > t0:
            raise DomainError(f"t={t:.6g} does not exceed t_0={t0:.6g} (p={p})")
    if p == 1:
        log_t = math.log(t)
        radicand = (math.log(log_t) - math.log(2 * K)) / log_t if log_t > 0 else -1.0
        scale = params.c0
        first = params.max_gap / t
    else:
        s = t ** (1 - p)
        radicand = (math.log(s) - math.log(2 * (1 - p) * K)) / s
        scale = params.c0_prime
        first = params.max_gap / t ** p
    if not radicand > 0:
        raise DomainError(f"nonpositive radicand {radicand:.6g} at t={t:.6g}, p={p}")
    return first + K ** 1.5 * scale / delta * math.sqrt(radicand)


def optimal_exponent(
    params: TheoryParams, t_eval: float, p_grid: Iterable[float], check_t0: bool = False
) -> float:
    """Grid point ``p`` with the smallest regret upper bound at ``t_eval``."""
    best_p, best = None, math.inf
    for p in p_grid:
        try:
            value = regret_upper_bound(params.with_exponent(p), t_eval, check_t0=check_t0)
        except DomainError as exc:
            raise DomainError(f"grid point p={p}: {exc}") from exc
        if value < best:
            best_p, best = p, value
    if best_p is None:
        raise InvalidArgumentError("empty exponent grid")
    return best_p


def estimate_max_gap(env, rng, samples: int = 100_000) -> tuple[float, float]:
    """Monte-Carlo ``max_i E[Delta_i(X)]`` and the standard error of the maximizing arm."""
    gaps = np.empty((samples, env.num_actions))
    for s in range(samples):
        _, oracle = env.sample_context(rng)
        gaps[s] = oracle.gaps
    means = gaps.mean(axis=0)
    i = int(np.argmax(means))
    return float(means[i]), float(gaps[:, i].std(ddof=1) / math.sqrt(samples))
