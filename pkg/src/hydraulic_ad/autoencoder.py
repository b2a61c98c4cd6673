"""Fully connected autoencoder trained with backpropagation and Adam.

Hidden layers use the logistic sigmoid, the output layer is linear. The
training objective is the mean squared reconstruction error over all
samples and attributes.

Adam update for parameter ``w`` with gradient ``g`` at step ``t``::

    m = b1 * m + (1 - b1) * g
    v = b2 * v + (1 - b2) * g**2
    w -= lr * (m / (1 - b1**t)) / (sqrt(v / (1 - b2**t)) + eps)
"""

from __future__ import annotations

import csv
import logging

import numpy as np

from .base import BaseDetector
from .exceptions import DataError, TrainingError
from .numerics import make_rng, row_matmul, sigmoid

logger = logging.getLogger(__name__)

Params = list[tuple[np.ndarray, np.ndarray]]


def init_params(sizes, rng: np.random.Generator) -> Params:
    """Glorot-uniform weights, zero biases."""
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        params.append((rng.uniform(-lim, lim, size=(fan_in, fan_out)), np.zeros(fan_out)))
    return params


def forward(params: Params, X: np.ndarray, matmul=np.matmul) -> list[np.ndarray]:
    acts = [X]
    for k, (W, b) in enumerate(params):
        z = matmul(acts[-1], W) + b
        acts.append(z if k == len(params) - 1 else sigmoid(z))
    return acts


def reconstruction_error(params: Params, X: np.ndarray) -> np.ndarray:
    """Per-sample mean squared error between ``X`` and its reconstruction."""
    out = forward(params, X, row_matmul)[-1]
    return ((out - X) ** 2).mean(axis=1)


def loss_and_grads(params: Params, X: np.ndarray):
    acts = forward(params, X)
    diff = acts[-1] - X
    loss = float((diff ** 2).mean())
    delta = 2.0 * diff / diff.size
    grads = [None] * len(params)
    for k in range(len(params) - 1, -1, -1):
        W, _ = params[k]
        grads[k] = (acts[k].T @ delta, delta.sum(axis=0))
        if k > 0:
            a = acts[k]
            delta = (delta @ W.T) * a * (1.0 - a)
    return loss, grads


def gradient_check(params: Params, X, n_checks: int = 40, step: float = 1e-5, seed: int = 0,
                   layers=None) -> float:
    """Max relative error between backprop and central finite differences.

    Checks ``n_checks`` randomly chosen parameter entries (restricted to
    ``layers`` if given). Pairs where both gradients are below 1e-12 count
    as agreeing.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    rng = make_rng(seed)
    _, grads = loss_and_grads(params, X)
    slots = [(k, j) for k in (range(len(params)) if layers is None else layers) for j in (0, 1)]
    worst = 0.0
    for _ in range(n_checks):
        k, j = slots[rng.integers(len(slots))]
        arr = params[k][j]
        pos = tuple(int(rng.integers(s)) for s in arr.shape)
        orig = arr[pos]
        arr[pos] = orig + step
        lp, _ = loss_and_grads(params, X)
        arr[pos] = orig - step
        lm, _ = loss_and_grads(params, X)
        arr[pos] = orig
        numeric = (lp - lm) / (2 * step)
        analytic = grads[k][j][pos]
        scale = abs(numeric) + abs(analytic)
        if scale > 1e-12:
            worst = max(worst, abs(numeric - analytic) / scale)
    return worst


class DeepAutoencoder(BaseDetector):
    """Symmetric autoencoder detector scored by reconstruction error.

    ``hidden_layer_sizes`` lists encoder and decoder hidden widths, e.g.
    ``(32, 8, 32)`` for a 68-32-8-32-68 network. Calibrated by default with
    the best-F1 policy, which needs a few labelled anomalies in validation.
    """

    def __init__(self, hidden_layer_sizes=(32, 8, 32), epochs=200, batch_size=32,
                 learning_rate=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8,
                 threshold_policy="best_f1", percentile=99.0, gamma=1.0,
                 standardize=True, random_state=0):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.threshold_policy = threshold_policy
        self.percentile = percentile
        self.gamma = gamma
        self.standardize = standardize
        self.random_state = random_state

    def _fit(self, X):
        hidden = list(self.hidden_layer_sizes)
        if hidden != hidden[::-1]:
            raise ValueError(f"hidden_layer_sizes must be symmetric, got {hidden}")
        if hidden and min(hidden) >= X.shape[1]:
            raise ValueError("bottleneck must be narrower than the input")
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("epochs >= 0, batch_size >= 1 and learning_rate > 0 required")
        rng = make_rng(self.random_state)
        sizes = [X.shape[1], *hidden, X.shape[1]]
        self.params_ = init_params(sizes, rng)
        self.loss_curve_ = [float(reconstruction_error(self.params_, X).mean())]
        m = [(np.zeros_like(W), np.zeros_like(b)) for W, b in self.params_]
        v = [(np.zeros_like(W), np.zeros_like(b)) for W, b in self.params_]
        b1, b2, lr, eps = self.beta1, self.beta2, self.learning_rate, self.epsilon
        t = 0
        n = X.shape[0]
        for epoch in range(self.epochs):
            order = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                batch = X[order[start:start + self.batch_size]]
                try:
                    _, grads = loss_and_grads(self.params_, batch)
                except DataError as exc:
                    raise TrainingError(f"autoencoder diverged at epoch {epoch + 1}") from exc
                t += 1
                for k, g_layer in enumerate(grads):
                    for j in (0, 1):
                        g = g_layer[j]
                        m[k][j][...] = b1 * m[k][j] + (1 - b1) * g
                        v[k][j][...] = b2 * v[k][j] + (1 - b2) * g * g
                        mhat = m[k][j] / (1 - b1 ** t)
                        vhat = v[k][j] / (1 - b2 ** t)
                        self.params_[k][j][...] -= lr * mhat / (np.sqrt(vhat) + eps)
            loss = float(reconstruction_error(self.params_, X).mean())
            if not np.isfinite(loss):
                raise TrainingError(f"autoencoder diverged at epoch {epoch + 1} (loss {loss})")
            self.loss_curve_.append(loss)
        logger.debug("DAE loss %.4g -> %.4g", self.loss_curve_[0], self.loss_curve_[-1])

    def _score(self, X):
        return reconstruction_error(self.params_, X)

    def gradient_check(self, X, **kwargs) -> float:
        return gradient_check(self.params_, self._transform(X), **kwargs)

    def write_loss_curve(self, path) -> None:
        """Write ``epoch,loss`` rows; epoch 0 is the untrained network."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "loss"])
            for e, loss in enumerate(self.loss_curve_):
                w.writerow([e, repr(loss)])

    def _state_arrays(self):
        out = {}
        for k, (W, b) in enumerate(self.params_):
            out[f"W{k}"] = W
            out[f"b{k}"] = b
        return out

    def _load_state_arrays(self, arrays):
        n = sum(1 for k in arrays if k.startswith("W"))
        self.params_ = [(arrays[f"W{k}"], arrays[f"b{k}"]) for k in range(n)]
