"""Shared semi-supervised detector lifecycle.

All detectors follow the same pattern::

    det = SomeDetector(...).fit(X_train)         # normal-only data
    det.calibrate(X_valid, y_valid)               # sets det.threshold_
    labels = det.predict(X_test)                  # 1 = anomaly, 0 = normal

``anomaly_score`` is oriented so that higher means more anomalous, and a
sample is flagged only when its score is strictly above ``threshold_``.

Fitted detectors can be written with :func:`save_detector` to an ``.npz``
container: a JSON header under the ``__meta__`` key (format version,
class name, constructor parameters, threshold) plus one array per piece of
fitted state. :func:`load_detector` restores predictions bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, OutlierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import FormatError
from .features import Scaler
from .numerics import percentile

FORMAT_VERSION = 1
POLICIES = ("percentile", "best_f1")


def percentile_gamma_threshold(scores, p: float, gamma: float) -> float:
    """``gamma`` times the nearest-rank ``p``-th percentile of ``scores``."""
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    return gamma * percentile(scores, p)


def best_f1_threshold(scores, y) -> float:
    """Threshold maximising F1 over midpoints between adjacent distinct sorted scores.

    One extra candidate below the smallest score (half a gap below it)
    covers flagging everything. Ties go to the lower threshold. With a
    single distinct score the only candidate is that score minus 1.
    """
    scores = np.asarray(scores, dtype=float)
    y = np.asarray(y, dtype=int)
    if scores.shape != y.shape or scores.size == 0:
        raise ValueError("scores and labels must be non-empty and of equal length")
    if not y.any():
        raise ValueError("best-F1 calibration needs at least one anomaly in validation")
    u = np.unique(scores)
    if u.size > 1:
        mids = (u[:-1] + u[1:]) / 2
        candidates = np.r_[u[0] - (u[1] - u[0]) / 2, mids]
    else:
        candidates = u - 1.0
    n_pos = y.sum()
    flagged = scores[None, :] > candidates[:, None]
    tp = (flagged & (y == 1)).sum(axis=1)
    fp = (flagged & (y == 0)).sum(axis=1)
    denom = 2 * tp + fp + (n_pos - tp)
    f1 = np.where(denom > 0, 2 * tp / np.maximum(denom, 1), 0.0)
    return float(candidates[int(np.argmax(f1))])


@dataclass
class ScoreReport:
    score: np.ndarray
    predicted: np.ndarray
    truth: np.ndarray
    fault: np.ndarray

    def __len__(self) -> int:
        return len(self.score)


class BaseDetector(OutlierMixin, BaseEstimator):
    """Base class; subclasses implement ``_fit``, ``_score`` and ``_state_arrays``.

    Common parameters
    -----------------
    threshold_policy : {"percentile", "best_f1"}
    percentile, gamma : float
        Used by the percentile policy: threshold = gamma * percentile_p(scores).
    standardize : bool
        Standardise inputs with statistics of the training set.
    random_state : int
    """

    _state_keys: tuple[str, ...] = ()

    def _validate_common(self):
        if self.threshold_policy not in POLICIES:
            raise ValueError(f"threshold_policy must be one of {POLICIES}")
        if not (0 < self.percentile <= 100):
            raise ValueError(f"percentile must lie in (0, 100], got {self.percentile}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")

    def _check_X(self, X, fitted=True):
        X = check_array(X, ensure_min_samples=0 if fitted else 1)
        if fitted and X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X

    def fit(self, X, y=None):
        """Fit on normal-only data. ``y``, when given, must be all zeros."""
        self._validate_common()
        X = self._check_X(X, fitted=False)
        if y is not None:
            y = np.asarray(y)
            if y.shape[0] != X.shape[0]:
                raise ValueError("X and y have different lengths")
            if np.any(y != 0):
                raise ValueError("training data must contain normal samples only")
        self.n_features_in_ = X.shape[1]
        if self.standardize:
            self.scaler_ = Scaler().fit(X)
            X = self.scaler_.transform(X)
        else:
            self.scaler_ = None
        self._fit(X)
        self.threshold_ = None
        return self

    def _transform(self, X):
        X = self._check_X(X)
        return self.scaler_.transform(X) if self.scaler_ is not None else X

    def anomaly_score(self, X) -> np.ndarray:
        """Raw score per sample, higher = more anomalous."""
        check_is_fitted(self, "n_features_in_")
        X = self._transform(X)
        if X.shape[0] == 0:
            return np.empty(0)
        return self._score(X)

    def calibrate(self, X, y=None):
        """Set ``threshold_`` from validation data according to ``threshold_policy``."""
        scores = self.anomaly_score(X)
        if scores.size == 0:
            raise ValueError("validation set is empty")
        if self.threshold_policy == "percentile":
            if y is not None and np.any(np.asarray(y) != 0):
                raise ValueError("percentile calibration requires normal-only validation data")
            self.threshold_ = percentile_gamma_threshold(scores, self.percentile, self.gamma)
        else:
            if y is None:
                raise ValueError("best_f1 calibration requires validation labels")
            self.threshold_ = best_f1_threshold(scores, y)
        return self

    def _check_calibrated(self):
        check_is_fitted(self, "n_features_in_")
        if getattr(self, "threshold_", None) is None:
            raise ValueError("detector is not calibrated; call calibrate() first")

    def decision_function(self, X) -> np.ndarray:
        """``threshold_ - score``: negative values are anomalies."""
        self._check_calibrated()
        return self.threshold_ - self.anomaly_score(X)

    def predict(self, X) -> np.ndarray:
        """1 for anomaly (score strictly above threshold), 0 for normal."""
        self._check_calibrated()
        return (self.anomaly_score(X) > self.threshold_).astype(int)

    def report(self, X, y, fault=None) -> ScoreReport:
        self._check_calibrated()
        s = self.anomaly_score(X)
        y = np.asarray(y, dtype=int)
        fault = y.copy() if fault is None else np.asarray(fault, dtype=int)
        return ScoreReport(s, (s > self.threshold_).astype(int), y, fault)

    # -- serialisation hooks
    def _state_arrays(self) -> dict[str, np.ndarray]:
        return {k: np.asarray(getattr(self, k)) for k in self._state_keys}

    def _load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for k in self._state_keys:
            setattr(self, k, arrays[k])


def _registry():
    from .autoencoder import DeepAutoencoder
    from .classical import LocalOutlierFactor, OneClassSVM, RobustCovariance
    from .helm import HELM
    from .isolation_forest import IsolationForest

    return {cls.__name__: cls for cls in
            (RobustCovariance, LocalOutlierFactor, OneClassSVM, IsolationForest, DeepAutoencoder, HELM)}


def save_detector(detector: BaseDetector, path) -> None:
    check_is_fitted(detector, "n_features_in_")
    meta = {
        "format_version": FORMAT_VERSION,
        "class": type(detector).__name__,
        "params": detector.get_params(deep=False),
        "n_features_in": int(detector.n_features_in_),
        "threshold": detector.threshold_,
    }
    arrays = {f"state/{k}": v for k, v in detector._state_arrays().items()}
    if detector.scaler_ is not None:
        arrays["scaler/mean"] = detector.scaler_.mean_
        arrays["scaler/scale"] = detector.scaler_.scale_
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)


def load_detector(path) -> BaseDetector:
    with np.load(Path(path), allow_pickle=False) as z:
        if "__meta__" not in z.files:
            raise FormatError(f"{path}: not a detector file")
        meta = json.loads(bytes(z["__meta__"]).decode())
        data = {k: z[k] for k in z.files if k != "__meta__"}
    if meta.get("format_version") != FORMAT_VERSION:
        raise FormatError(
            f"{path}: model format version {meta.get('format_version')} is not supported "
            f"(this build reads version {FORMAT_VERSION})"
        )
    cls = _registry().get(meta["class"])
    if cls is None:
        raise FormatError(f"{path}: unknown detector class {meta['class']!r}")
    # JSON turns tuples into lists
    params = {k: tuple(v) if isinstance(v, list) else v for k, v in meta["params"].items()}
    det = cls(**params)
    det.n_features_in_ = meta["n_features_in"]
    det.threshold_ = meta["threshold"]
    if "scaler/mean" in data:
        det.scaler_ = Scaler()
        det.scaler_.mean_ = data["scaler/mean"]
        det.scaler_.scale_ = data["scaler/scale"]
        det.scaler_.n_features_in_ = det.n_features_in_
    else:
        det.scaler_ = None
    det._load_state_arrays({k[len("state/"):]: v for k, v in data.items() if k.startswith("state/")})
    return det
