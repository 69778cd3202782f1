"""Context/reward generators that also reveal the true per-arm means.

Every environment returns, with each context, an :class:`Oracle` holding the
conditional means ``mu_j(X)`` so regret can be computed exactly rather than
estimated from noisy rewards.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import InvalidArgumentError

NUM_DIGITS = 10

# Digit layout for the codebook task: 9 at the origin, then rings of three
# digits at radii 1, 2, 3 with value falling outward. Any linear score ranks
# outer (low) digits first, so the best linear ranking earns about 4.6 for
# K=5 against 4.5 for random picks, while the value is close to a cone in the
# code's radius, which a small ReLU network fits quickly.
RING_RADII = (1.0, 2.0, 3.0)
RING_OFFSETS_DEG = (90.0, 30.0, 90.0)


class Oracle:
    """True per-arm means of one context; the best arm and its mean are precomputed."""

    __slots__ = ("means", "optimal_arm", "optimal_mean")

    def __init__(self, means):
        self.means = np.asarray(means, dtype=float)
        self.optimal_arm = int(self.means.argmax())
        self.optimal_mean = float(self.means[self.optimal_arm])

    def gap(self, arm: int) -> float:
        return max(0.0, self.optimal_mean - float(self.means[arm]))

    @property
    def gaps(self) -> np.ndarray:
        return np.maximum(0.0, self.optimal_mean - self.means)

    def __repr__(self):
        return f"Oracle(means={self.means.tolist()})"


class Environment:
    """Base class: i.i.d. contexts and Gaussian-noise rewards around known means."""

    num_actions: int
    context_dim: int
    noise_sigma: float
    min_gap: float | None = None

    def sample_context(self, rng: np.random.Generator) -> tuple[np.ndarray, Oracle]:
        raise NotImplementedError

    def mean_function(self, arm: int) -> Callable[[np.ndarray], float]:
        """Exact ``x -> mu_arm(x)``; used to build perfect-oracle predictors."""
        raise NotImplementedError(f"{type(self).__name__} exposes no mean function")

    def draw_reward(self, oracle: Oracle, arm: int, rng: np.random.Generator) -> float:
        self._check_arm(arm)
        z = rng.standard_normal()
        return float(oracle.means[arm] + self.noise_sigma * z)

    def _check_arm(self, arm):
        if not 0 <= arm < self.num_actions:
            raise InvalidArgumentError(f"arm {arm} out of range [0, {self.num_actions})")


def ring_codebook(radii=RING_RADII, offsets_deg=RING_OFFSETS_DEG) -> np.ndarray:
    """2-D code for each digit, ``(10, 2)``; rows indexed by digit."""
    codes = np.zeros((NUM_DIGITS, 2))
    for ring, (radius, offset) in enumerate(zip(radii, offsets_deg)):
        for i in range(3):
            angle = np.deg2rad(offset + 120.0 * i)
            codes[8 - 3 * ring - i] = radius * np.cos(angle), radius * np.sin(angle)
    return codes


def circle_codebook(offset=0.1) -> np.ndarray:
    """Digits in order on the unit circle (linearly exploitable; kept for comparison)."""
    angles = 2 * np.pi * np.arange(NUM_DIGITS) / NUM_DIGITS + offset
    return np.column_stack([np.cos(angles), np.sin(angles)])


class CodebookEnv(Environment):
    """Pick-the-largest-digit task with digits drawn as fixed 2-D codes.

    Each step draws K digits uniformly from 0..9; arm ``j`` pays digit ``d_j``
    plus N(0, sigma^2) noise. The context concatenates the K codes, so its
    dimension is ``2 K``.
    """

    min_gap = 1.0

    def __init__(self, num_actions=5, noise_sigma=0.0, codebook=None):
        if num_actions < 2:
            raise InvalidArgumentError("need at least two arms")
        self.num_actions = int(num_actions)
        self.noise_sigma = float(noise_sigma)
        self.codebook = ring_codebook() if codebook is None else np.asarray(codebook, float)
        if self.codebook.shape[0] != NUM_DIGITS:
            raise InvalidArgumentError("codebook needs one row per digit")
        self.code_dim = self.codebook.shape[1]
        self.context_dim = self.num_actions * self.code_dim

    def context_for_digits(self, digits) -> tuple[np.ndarray, Oracle]:
        digits = np.asarray(digits, dtype=int)
        if digits.shape != (self.num_actions,) or digits.min() < 0 or digits.max() > 9:
            raise InvalidArgumentError(f"need {self.num_actions} digits in 0..9, got {digits}")
        return self.codebook[digits].ravel(), Oracle(digits.astype(float))

    def sample_context(self, rng):
        return self.context_for_digits(rng.integers(NUM_DIGITS, size=self.num_actions))

    def decode(self, x) -> np.ndarray:
        """Nearest-code digits of a context."""
        codes = np.asarray(x, float).reshape(self.num_actions, self.code_dim)
        d2 = ((codes[:, None, :] - self.codebook[None, :, :]) ** 2).sum(-1)
        return d2.argmin(axis=1)

    def mean_function(self, arm):
        self._check_arm(arm)
        return lambda x: float(self.decode(x)[arm])


class LinearEnv(Environment):
    """Control task whose means are exactly linear: ``mu_j(X) = theta_j . X``."""

    def __init__(self, weights, noise_sigma=0.0):
        self.weights = np.asarray(weights, dtype=float)
        if self.weights.ndim != 2 or self.weights.shape[0] < 2:
            raise InvalidArgumentError("weights must be a (K >= 2, m) matrix")
        self.num_actions, self.context_dim = self.weights.shape
        self.noise_sigma = float(noise_sigma)

    @classmethod
    def random(cls, num_actions, context_dim, noise_sigma, rng):
        return cls(rng.standard_normal((num_actions, context_dim)), noise_sigma)

    def context_for(self, x) -> tuple[np.ndarray, Oracle]:
        x = np.asarray(x, dtype=float)
        return x, Oracle(self.weights @ x)

    def sample_context(self, rng):
        return self.context_for(rng.standard_normal(self.context_dim))

    def mean_function(self, arm):
        self._check_arm(arm)
        w = self.weights[arm]
        return lambda x: float(w @ x)


class GapEnv(Environment):
    """One arm pays ``gap``, the rest pay 0; the context one-hot encodes the winner.

    Every context has a suboptimal arm and every suboptimal arm trails by
    exactly ``gap``, so the optimality gap is tight.
    """

    def __init__(self, num_actions=2, gap=1.0, noise_sigma=0.0):
        if num_actions < 2:
            raise InvalidArgumentError("need at least two arms")
        if not gap > 0:
            raise InvalidArgumentError(f"gap must be positive, got {gap}")
        self.num_actions = self.context_dim = int(num_actions)
        self.gap = self.min_gap = float(gap)
        self.noise_sigma = float(noise_sigma)

    def sample_context(self, rng):
        x = np.zeros(self.num_actions)
        x[rng.integers(self.num_actions)] = 1.0
        return x, Oracle(self.gap * x)

    def mean_function(self, arm):
        self._check_arm(arm)
        return lambda x: float(self.gap * x[arm])


class MnistEnv(Environment):
    """Pick-the-largest-digit task over real images.

    Per arm a digit class is drawn uniformly, then an image of that class is
    drawn uniformly with replacement. ``features`` are the (already pooled)
    image vectors.
    """

    min_gap = 1.0

    def __init__(self, features, labels, num_actions=5, noise_sigma=0.0):
        self.features = np.asarray(features, dtype=float)
        labels = np.asarray(labels, dtype=int)
        if self.features.shape[0] != labels.shape[0]:
            raise InvalidArgumentError("features and labels differ in length")
        self.by_digit = [np.flatnonzero(labels == d) for d in range(NUM_DIGITS)]
        missing = [d for d, idx in enumerate(self.by_digit) if idx.size == 0]
        if missing:
            raise InvalidArgumentError(f"no images for digits {missing}")
        self.num_actions = int(num_actions)
        self.noise_sigma = float(noise_sigma)
        self.context_dim = self.num_actions * self.features.shape[1]

    def sample_context(self, rng):
        digits = rng.integers(NUM_DIGITS, size=self.num_actions)
        rows = [self.by_digit[d][rng.integers(self.by_digit[d].size)] for d in digits]
        return self.features[rows].ravel(), Oracle(digits.astype(float))


def expected_optimal_mean(num_actions: int, levels: int = NUM_DIGITS) -> float:
    """Exact ``E[max of K iid uniform{0..levels-1}]``."""
    if num_actions < 1:
        raise InvalidArgumentError("num_actions must be positive")
    total = sum(
        k * (Fraction(k + 1, levels) ** num_actions - Fraction(k, levels) ** num_actions)
        for k in range(levels)
    )
    return float(total)
