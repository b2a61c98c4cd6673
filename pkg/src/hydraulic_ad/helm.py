"""Hierarchical extreme learning machine for one-class anomaly detection.

Stacked ELM autoencoders learn the feature hierarchy; a final ELM layer is
solved towards an all-ones target on normal data. The anomaly score of a
sample is ``|1 - Y|`` where ``Y`` is the one-class output, and the threshold
is ``gamma * percentile_p(|1 - Y_valid|)`` on normal-only validation data.

Each ELM layer draws its input weights uniformly in [-1, 1], rescales every
hidden unit's weight vector to unit length, draws per-unit biases uniformly
in [-1, 1] and solves the output weights by ridge regression. An
autoencoder layer maps its input ``X`` to ``g(k * X beta^T)`` for the next
layer, where ``k = activation_scale / max|X beta^T|`` over the training
data keeps the sigmoid out of saturation (``activation_scale=None`` gives
``k = 1``).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .base import BaseDetector, percentile_gamma_threshold
from .dataset import FAULT_NAMES
from .numerics import make_rng, ridge_solve, row_matmul, sigmoid


@dataclass
class ElmLayer:
    W: np.ndarray  # (L, d) input weights
    b: np.ndarray  # (L,) biases
    beta: np.ndarray  # (L, m) or (L,) output weights
    scale: float = 1.0  # pre-activation factor of the feature map

    @property
    def width(self) -> int:
        return self.W.shape[0]


def random_layer(d: int, L: int, rng: np.random.Generator) -> ElmLayer:
    W = rng.uniform(-1.0, 1.0, size=(L, d))
    norms = np.linalg.norm(W, axis=1, keepdims=True)
    W /= np.where(norms > 0, norms, 1.0)
    b = rng.uniform(-1.0, 1.0, size=L)
    return ElmLayer(W, b, np.zeros((L, 0)))


def elm_forward(layer: ElmLayer, X) -> np.ndarray:
    """Hidden-layer matrix H with H[j, i] = g(W_i . x_j + b_i)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != layer.W.shape[1]:
        raise ValueError(f"expected {layer.W.shape[1]} input columns, got {X.shape[1]}")
    return sigmoid(row_matmul(X, layer.W.T) + layer.b)


def fit_elm_autoencoder(X, L: int, C: float, rng: np.random.Generator,
                        activation_scale: float | None = None):
    """Fit one ELM autoencoder layer.

    Returns ``(layer, next_features, reconstruction_error)`` where the error
    is ``||H beta - X||^2 / N``.
    """
    X = np.asarray(X, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("X is empty")
    layer = random_layer(X.shape[1], L, rng)
    H = elm_forward(layer, X)
    layer.beta = ridge_solve(H, X, C)
    err = float(((H @ layer.beta - X) ** 2).sum() / X.shape[0])
    if activation_scale is not None:
        peak = float(np.abs(row_matmul(X, layer.beta.T)).max())
        layer.scale = activation_scale / peak if peak > 0 else 1.0
    return layer, encode(layer, X), err


def encode(layer: ElmLayer, X) -> np.ndarray:
    return sigmoid(layer.scale * row_matmul(X, layer.beta.T))


def fit_oneclass_elm(F, L: int, C: float, rng: np.random.Generator) -> ElmLayer:
    """ELM layer whose output weights solve H beta = 1 (ridge)."""
    F = np.asarray(F, dtype=float)
    layer = random_layer(F.shape[1], L, rng)
    H = elm_forward(layer, F)
    layer.beta = ridge_solve(H, np.ones(F.shape[0]), C)
    return layer


def oneclass_output(layer: ElmLayer, F) -> np.ndarray:
    return row_matmul(elm_forward(layer, F), layer.beta)


def helm_threshold(deviations, p: float, gamma: float) -> float:
    """``gamma * percentile_p(deviations)`` with deviations = |1 - Y_valid|."""
    d = np.asarray(deviations, dtype=float)
    if d.size == 0:
        raise ValueError("validation set is empty")
    return percentile_gamma_threshold(d, p, gamma)


def deviation_ratio(deviation, threshold: float) -> np.ndarray:
    """``deviation / threshold``; with a zero threshold, +inf for nonzero deviations."""
    dev = np.asarray(deviation, dtype=float)
    if threshold > 0:
        return dev / threshold
    return np.where(dev > 0, np.inf, 0.0)


class HELM(BaseDetector):
    """Stacked ELM autoencoders followed by a one-class ELM.

    Parameters
    ----------
    hidden_sizes : sequence of int
        Widths of the autoencoder feature layers.
    classifier_size : int
        Width of the one-class layer.
    C_feature, C_classifier : float
        Ridge constants (regularisation is ||beta||^2 / C).
    activation_scale : float or None
        Peak absolute pre-activation of each feature map on training data.
    """

    def __init__(self, hidden_sizes=(64, 64), classifier_size=256, C_feature=1e2,
                 C_classifier=1e4, activation_scale=1.0, threshold_policy="percentile",
                 percentile=99.0, gamma=1.2, standardize=True, random_state=0):
        self.hidden_sizes = hidden_sizes
        self.classifier_size = classifier_size
        self.C_feature = C_feature
        self.C_classifier = C_classifier
        self.activation_scale = activation_scale
        self.threshold_policy = threshold_policy
        self.percentile = percentile
        self.gamma = gamma
        self.standardize = standardize
        self.random_state = random_state

    def _fit(self, X):
        if len(self.hidden_sizes) < 1:
            raise ValueError("HELM needs at least one feature layer")
        rng = make_rng(self.random_state)
        self.feature_layers_ = []
        self.reconstruction_errors_ = []
        F = X
        for L in self.hidden_sizes:
            layer, F, err = fit_elm_autoencoder(F, int(L), self.C_feature, rng,
                                                self.activation_scale)
            self.feature_layers_.append(layer)
            self.reconstruction_errors_.append(err)
        self.classifier_ = fit_oneclass_elm(F, int(self.classifier_size), self.C_classifier, rng)

    def features(self, X) -> np.ndarray:
        """Classifier-input features of already-transformed ``X``."""
        F = X
        for layer in self.feature_layers_:
            F = encode(layer, F)
        return F

    def output(self, X) -> np.ndarray:
        """One-class output Y for raw (untransformed) ``X``."""
        return oneclass_output(self.classifier_, self.features(self._transform(X)))

    def _score(self, X):
        return np.abs(1.0 - oneclass_output(self.classifier_, self.features(X)))

    def ratios(self, X) -> np.ndarray:
        """``|1 - Y| / threshold_`` per sample (> 1 means anomaly)."""
        self._check_calibrated()
        return deviation_ratio(self.anomaly_score(X), self.threshold_)

    def _state_arrays(self):
        out = {}
        for k, layer in enumerate([*self.feature_layers_, self.classifier_]):
            out[f"W{k}"], out[f"b{k}"], out[f"beta{k}"] = layer.W, layer.b, layer.beta
            out[f"scale{k}"] = np.asarray(layer.scale)
        return out

    def _load_state_arrays(self, arrays):
        n = sum(1 for k in arrays if k.startswith("W"))
        layers = [ElmLayer(arrays[f"W{k}"], arrays[f"b{k}"], arrays[f"beta{k}"],
                           float(arrays[f"scale{k}"])) for k in range(n)]
        self.feature_layers_, self.classifier_ = layers[:-1], layers[-1]


def write_ratio_csv(path, cycles, faults, ratios) -> None:
    """Write ``cycle,fault,ratio`` rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cycle", "fault", "ratio"])
        for c, f, r in zip(cycles, faults, ratios):
            w.writerow([int(c), FAULT_NAMES[int(f)], repr(float(r))])
