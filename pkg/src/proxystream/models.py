"""Incremental regressors trained on proxy batches.

Both models share the same update/predict surface: ``update(x, y)`` folds in
one batch, ``predict(x)`` scores rows, and predicting before any update
raises :class:`ColdStartError`. Given the same seed and the same update
sequence, a model's state and predictions are reproducible exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Union

import numpy as np

RLS_LINEAR = "rls_linear"
SGD_MLP = "sgd_mlp"

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]


class ColdStartError(RuntimeError):
    """predict() was called before the model saw a single update."""


@dataclass(frozen=True)
class ModelSpec:
    """Which regressor to build and its hyperparameters.

    ``input_width`` may be left at 0 to have the pipeline fill it in from
    the use case's feature width.
    """

    kind: str = RLS_LINEAR
    input_width: int = 0
    ridge: float = 1e-6
    hidden: int = 16
    learning_rate: float = 0.01
    epochs: int = 1

    def __post_init__(self) -> None:
        if self.kind not in (RLS_LINEAR, SGD_MLP):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.ridge <= 0:
            raise ValueError("ridge must be positive")
        if self.kind == SGD_MLP:
            if self.hidden < 1:
                raise ValueError("hidden width must be >= 1")
            if self.learning_rate <= 0:
                raise ValueError("learning rate must be positive")
            if self.epochs < 1:
                raise ValueError("epochs must be >= 1")

    def with_width(self, input_width: int) -> "ModelSpec":
        return replace(self, input_width=input_width)


def init_model(spec: ModelSpec, seed: SeedLike = 0):
    if spec.input_width < 1:
        raise ValueError("input_width must be set before building a model")
    if spec.kind == RLS_LINEAR:
        return RecursiveLeastSquares(spec.input_width, ridge=spec.ridge)
    return OnlineMLP(spec.input_width, hidden=spec.hidden,
                     learning_rate=spec.learning_rate, epochs=spec.epochs, seed=seed)


def _check_batch(x: np.ndarray, y: np.ndarray | None, width: int):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != width:
        raise ValueError(f"expected rows of width {width}, got shape {x.shape}")
    if y is None:
        return x, None
    y = np.asarray(y, dtype=float).reshape(-1)
    if len(y) != len(x):
        raise ValueError(f"{len(x)} rows but {len(y)} targets")
    if len(x) == 0:
        raise ValueError("empty update batch")
    return x, y


class RecursiveLeastSquares:
    """Exact least squares maintained through accumulated normal equations.

    State is the information matrix A = ridge*I + sum x x^T and moment vector
    b = sum y x over all rows seen, with an intercept column appended last.
    Splitting the same rows into batches in any order yields the same state,
    and as ridge -> 0 the weights match the batch least-squares solution.
    """

    def __init__(self, input_width: int, ridge: float = 1e-6) -> None:
        if input_width < 1:
            raise ValueError("input_width must be >= 1")
        self.input_width = input_width
        self.ridge = ridge
        d = input_width + 1
        self._info = np.eye(d) * ridge
        self._moment = np.zeros(d)
        self._weights = np.zeros(d)
        self.n_updates = 0
        self.n_rows = 0

    @property
    def weights(self) -> np.ndarray:
        """Current coefficient vector, intercept last."""
        return self._weights.copy()

    def _augment(self, x: np.ndarray) -> np.ndarray:
        return np.hstack([x, np.ones((len(x), 1))])

    def update(self, x: np.ndarray, y: np.ndarray) -> None:
        x, y = _check_batch(x, y, self.input_width)
        xa = self._augment(x)
        self._info += xa.T @ xa
        self._moment += xa.T @ y
        self._weights = np.linalg.solve(self._info, self._moment)
        self.n_updates += 1
        self.n_rows += len(x)

    def predict(self, x: np.ndarray) -> np.ndarray:
        if self.n_updates == 0:
            raise ColdStartError("predict before first update")
        x, _ = _check_batch(x, None, self.input_width)
        return self._augment(x) @ self._weights


class OnlineMLP:
    """One hidden tanh layer, linear output, plain per-sample SGD.

    Each update makes ``epochs`` passes over the batch in a seeded shuffled
    order, stepping on squared-error loss 0.5 (yhat - y)^2 per sample.
    """

    def __init__(self, input_width: int, hidden: int = 16,
                 learning_rate: float = 0.01, epochs: int = 1,
                 seed: SeedLike = 0) -> None:
        if input_width < 1:
            raise ValueError("input_width must be >= 1")
        if hidden < 1:
            raise ValueError("hidden width must be >= 1")
        if learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if epochs < 1:
            raise ValueError("epochs must be >= 1")
        self.input_width = input_width
        self.hidden = hidden
        self.learning_rate = learning_rate
        self.epochs = epochs
        rng = np.random.default_rng(seed)
        self.w_hidden = rng.normal(0.0, 1.0 / np.sqrt(input_width), (hidden, input_width))
        self.b_hidden = np.zeros(hidden)
        self.w_out = rng.normal(0.0, 1.0 / np.sqrt(hidden), hidden)
        self.b_out = 0.0
        self._rng = rng
        self.n_updates = 0
        self.n_rows = 0

    def _forward(self, x: np.ndarray) -> np.ndarray:
        h = np.tanh(x @ self.w_hidden.T + self.b_hidden)
        return h @ self.w_out + self.b_out

    def predict(self, x: np.ndarray) -> np.ndarray:
        if self.n_updates == 0:
            raise ColdStartError("predict before first update")
        x, _ = _check_batch(x, None, self.input_width)
        return self._forward(x)

    def update(self, x: np.ndarray, y: np.ndarray) -> None:
        x, y = _check_batch(x, y, self.input_width)
        lr = self.learning_rate
        for _ in range(self.epochs):
            for i in self._rng.permutation(len(x)):
                grads = self.gradients(x[i], y[i])
                self.w_hidden -= lr * grads["w_hidden"]
                self.b_hidden -= lr * grads["b_hidden"]
                self.w_out -= lr * grads["w_out"]
                self.b_out -= lr * grads["b_out"]
        self.n_updates += 1
        self.n_rows += len(x)

    def sample_loss(self, x: np.ndarray, y: float) -> float:
        """Squared-error loss of one sample under the current parameters."""
        x = np.asarray(x, dtype=float).reshape(-1)
        pred = float(self._forward(x[None, :])[0])
        return 0.5 * (pred - y) ** 2

    def gradients(self, x: np.ndarray, y: float) -> dict[str, np.ndarray | float]:
        """Analytic loss gradients for one sample, keyed by parameter name."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape != (self.input_width,):
            raise ValueError(f"expected one row of width {self.input_width}")
        pre = self.w_hidden @ x + self.b_hidden
        h = np.tanh(pre)
        pred = float(h @ self.w_out + self.b_out)
        delta = pred - float(y)
        d_hidden = delta * self.w_out * (1.0 - h ** 2)
        return {
            "w_hidden": np.outer(d_hidden, x),
            "b_hidden": d_hidden,
            "w_out": delta * h,
            "b_out": delta,
        }
