"""Per-arm reward regressors.

Any object with ``predict(x) -> float`` and ``fit(X, y, rng)`` can drive an
epsilon-greedy policy; the convergence argument only needs the regressor's
mean squared error to shrink with the number of samples it is trained on.
"""

from __future__ import annotations

from typing import Callable, Protocol, Sequence

import numpy as np
import scipy.linalg

from .errors import InvalidArgumentError, TrainingDivergedError


class Predictor(Protocol):
    context_dim: int

    def predict(self, x: np.ndarray) -> float: ...

    def fit(self, X: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> None: ...


class MlpModel:
    """Fully connected regressor, ReLU hidden layers and a linear output unit.

    Trained by plain mini-batch gradient descent on mean squared error.
    ``fit`` always continues from the current parameters.
    """

    def __init__(
        self,
        context_dim: int,
        hidden_widths: Sequence[int] = (100,),
        rng: np.random.Generator | None = None,
        epochs: int = 16,
        learning_rate: float = 1e-3,
        batch_size: int = 32,
    ):
        if context_dim < 1:
            raise InvalidArgumentError("context_dim must be positive")
        self.context_dim = int(context_dim)
        self.layer_sizes = [self.context_dim, *map(int, hidden_widths), 1]
        self.epochs = int(epochs)
        self.learning_rate = float(learning_rate)
        self.batch_size = int(batch_size)
        rng = np.random.default_rng(0) if rng is None else rng
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def params(self) -> list[np.ndarray]:
        """Parameters in a fixed order: W0, b0, W1, b1, ..."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def _forward(self, X):
        acts = [X]
        h = X
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ W + b
            h = z if i == last else np.maximum(z, 0.0)
            acts.append(h)
        return acts

    def predict_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.context_dim:
            raise InvalidArgumentError(
                f"expected contexts of dimension {self.context_dim}, got shape {X.shape}"
            )
        return self._forward(X)[-1][:, 0]

    def predict(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.context_dim,):
            raise InvalidArgumentError(
                f"expected a context of length {self.context_dim}, got shape {x.shape}"
            )
        return float(self._forward(x[None, :])[-1][0, 0])

    def loss(self, X, y) -> float:
        r = self.predict_batch(X) - np.asarray(y, dtype=float)
        return float(np.mean(r * r))

    def _backprop(self, X, y):
        acts = self._forward(X)
        delta = (2.0 / X.shape[0]) * (acts[-1] - y[:, None])
        grads = [None] * (2 * len(self.weights))
        for i in range(len(self.weights) - 1, -1, -1):
            grads[2 * i] = acts[i].T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            if i:
                delta = (delta @ self.weights[i].T) * (acts[i] > 0)
        return grads

    def gradient(self, X, y) -> list[np.ndarray]:
        """Gradient of the batch MSE, one array per entry of :attr:`params`."""
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] == 0:
            raise InvalidArgumentError("gradient needs a nonempty batch")
        if X.shape[1] != self.context_dim or y.shape[0] != X.shape[0]:
            raise InvalidArgumentError(f"batch shapes {X.shape} and {y.shape} do not match the model")
        return self._backprop(X, y)

    def fit(self, X, y, rng: np.random.Generator, epochs: int | None = None) -> None:
        """Shuffled mini-batch SGD for ``epochs`` passes; empty data is a no-op."""
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        epochs = self.epochs if epochs is None else int(epochs)
        n = y.shape[0]
        if n == 0 or epochs == 0:
            return
        if X.shape != (n, self.context_dim):
            raise InvalidArgumentError(f"training inputs have shape {X.shape}, expected ({n}, {self.context_dim})")
        bs = min(self.batch_size, n)
        lr = self.learning_rate
        params = self.params
        for _ in range(epochs):
            order = rng.permutation(n)
            for start in range(0, n, bs):
                idx = order[start:start + bs]
                for p, g in zip(params, self._backprop(X[idx], y[idx])):
                    p -= lr * g
        if not all(np.isfinite(p).all() for p in params):
            raise TrainingDivergedError(f"non-finite parameters after training on {n} samples")

    def to_flat(self) -> tuple[list[list[int]], np.ndarray]:
        """``(shapes, values)``; values concatenate the row-major parameters."""
        shapes = [list(p.shape) for p in self.params]
        return shapes, np.concatenate([p.ravel() for p in self.params])

    def load_flat(self, shapes, values) -> None:
        if [list(p.shape) for p in self.params] != [list(s) for s in shapes]:
            raise InvalidArgumentError("parameter shapes do not match this model")
        values = np.asarray(values, dtype=float)
        offset = 0
        for p in self.params:
            p[...] = values[offset:offset + p.size].reshape(p.shape)
            offset += p.size
        if offset != values.size:
            raise InvalidArgumentError(f"expected {offset} values, got {values.size}")


class LinearModel:
    """``mu(x) = B . x`` with no intercept, refit by (ridge) least squares.

    Keeps the Gram matrix and moment vector so refits after each new sample
    cost O(m^3) instead of O(n m^2).
    """

    def __init__(self, context_dim: int, ridge: float = 1e-8):
        if ridge < 0:
            raise InvalidArgumentError("ridge must be nonnegative")
        self.context_dim = int(context_dim)
        self.ridge = float(ridge)
        self.coef = np.zeros(self.context_dim)
        self.gram = np.zeros((self.context_dim, self.context_dim))
        self.moment = np.zeros(self.context_dim)

    def predict(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.context_dim,):
            raise InvalidArgumentError(
                f"expected a context of length {self.context_dim}, got shape {x.shape}"
            )
        return float(self.coef @ x)

    def fit(self, X, y, rng=None) -> None:
        fitted = linear_fit(np.asarray(X, dtype=float).reshape(-1, self.context_dim), y, self.ridge)
        self.coef, self.gram, self.moment = fitted.coef, fitted.gram, fitted.moment

    def update(self, x, r) -> None:
        """Add one sample and refit on everything seen so far."""
        x = np.asarray(x, dtype=float)
        self.gram += np.outer(x, x)
        self.moment += r * x
        self.coef = _solve_normal(self.gram, self.moment, self.ridge)


def _solve_normal(gram, moment, ridge):
    if ridge > 0:
        A = gram + ridge * np.eye(gram.shape[0])
        return scipy.linalg.solve(A, moment, assume_a="pos")
    return np.linalg.pinv(gram, hermitian=True) @ moment


def linear_fit(X, y, ridge: float = 1e-8) -> LinearModel:
    """Least squares ``argmin_B ||y - X B||^2 + ridge ||B||^2``.

    With ``ridge == 0`` the minimum-norm solution is returned, so
    rank-deficient designs are fine. Empty data gives the zero model.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2:
        raise InvalidArgumentError(f"design must be 2-D, got shape {X.shape}")
    model = LinearModel(X.shape[1], ridge)
    if X.shape[0] == 0:
        return model
    if X.shape[0] != y.shape[0]:
        raise InvalidArgumentError("design and targets differ in length")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise InvalidArgumentError("non-finite training data")
    model.gram = X.T @ X
    model.moment = X.T @ y
    if ridge == 0:
        model.coef = np.linalg.lstsq(X, y, rcond=None)[0]
    else:
        model.coef = _solve_normal(model.gram, model.moment, ridge)
    return model


class OraclePredictor:
    """Wraps an exact mean function; training is ignored."""

    trainable = False

    def __init__(self, mean_fn: Callable[[np.ndarray], float], context_dim: int):
        self.mean_fn = mean_fn
        self.context_dim = context_dim

    def predict(self, x) -> float:
        return float(self.mean_fn(x))

    def fit(self, X, y, rng=None) -> None:
        pass
