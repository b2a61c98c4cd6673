"""Per-cycle statistical features, standardisation and exploration statistics.

Every cycle is summarised by four statistics (mean, variance, skewness,
kurtosis) of each of its 17 sensor channels, giving 68 attributes ordered
sensor-major: ``PS1_mean, PS1_var, PS1_skew, PS1_kurt, PS2_mean, ...``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .dataset import FAULT_NAMES, SENSOR_IDS, Cycle, Dataset, leakage_labels
from .numerics import moment_rows, moments

STAT_NAMES = ("mean", "var", "skew", "kurt")
FEATURE_NAMES = tuple(f"{sid}_{stat}" for sid in SENSOR_IDS for stat in STAT_NAMES)
N_FEATURES = len(FEATURE_NAMES)


@dataclass
class FeatureTable:
    """Feature matrix with per-row cycle index, binary label and fault code."""

    X: np.ndarray
    labels: np.ndarray
    faults: np.ndarray
    cycles: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float).reshape(-1, N_FEATURES)
        self.labels = np.asarray(self.labels, dtype=int)
        self.faults = np.asarray(self.faults, dtype=int)
        self.cycles = np.asarray(self.cycles, dtype=int)
        n = self.X.shape[0]
        if not (len(self.labels) == len(self.faults) == len(self.cycles) == n):
            raise ValueError("feature table columns have different lengths")

    def __len__(self) -> int:
        return self.X.shape[0]

    def take(self, idx) -> "FeatureTable":
        idx = np.asarray(idx, dtype=int)
        return FeatureTable(self.X[idx], self.labels[idx], self.faults[idx], self.cycles[idx])

    @classmethod
    def concat(cls, tables) -> "FeatureTable":
        tables = list(tables)
        return cls(
            np.vstack([t.X for t in tables]) if tables else np.empty((0, N_FEATURES)),
            np.concatenate([t.labels for t in tables]) if tables else [],
            np.concatenate([t.faults for t in tables]) if tables else [],
            np.concatenate([t.cycles for t in tables]) if tables else [],
        )


def extract_features(cycle: Cycle) -> np.ndarray:
    """68-attribute vector for a single cycle."""
    out = np.empty(N_FEATURES)
    for k, sid in enumerate(SENSOR_IDS):
        out[4 * k:4 * k + 4] = moments(cycle.channels[sid]).as_tuple()
    return out


def extract_table(dataset: Dataset) -> FeatureTable:
    """Vectorised :func:`extract_features` over a whole dataset."""
    X = np.empty((len(dataset), N_FEATURES))
    for k, sid in enumerate(SENSOR_IDS):
        X[:, 4 * k:4 * k + 4] = moment_rows(dataset.channels[sid])
    pump = dataset.pump
    return FeatureTable(X, leakage_labels(pump), pump, np.arange(len(dataset)))


class Scaler(TransformerMixin, BaseEstimator):
    """Per-attribute standardisation with population deviation.

    Attributes with zero deviation keep a divisor of 1, so they map to 0
    on the training data.
    """

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=1)
        self.mean_ = X.mean(axis=0)
        self.scale_ = X.std(axis=0)
        self.scale_[self.scale_ == 0] = 1.0
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        X = check_array(X, ensure_min_samples=0)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return (X - self.mean_) / self.scale_


def fit_scaler(train) -> Scaler:
    train = np.asarray(train, dtype=float)
    if train.size == 0:
        raise ValueError("training set is empty")
    return Scaler().fit(train)


def apply_scaler(scaler: Scaler, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return scaler.transform(v.reshape(1, -1))[0] if v.ndim == 1 else scaler.transform(v)


def correlation_matrix(X) -> np.ndarray:
    """Pearson correlation between columns; constant columns correlate 0 (1 on the diagonal)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need at least 2 samples")
    D = X - X.mean(axis=0)
    norms = np.sqrt((D * D).sum(axis=0))
    flat = norms == 0
    Z = D / np.where(flat, 1.0, norms)
    R = Z.T @ Z
    R[flat, :] = 0.0
    R[:, flat] = 0.0
    R = np.clip((R + R.T) / 2, -1.0, 1.0)
    np.fill_diagonal(R, 1.0)
    return R


def histogram(X, attribute: int, bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Equal-width histogram of one attribute over its [min, max] range."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    values = np.asarray(X, dtype=float)
    values = values[:, attribute] if values.ndim == 2 else values
    if values.size == 0:
        raise ValueError("no samples")
    counts, edges = np.histogram(values, bins=bins)
    return edges, counts


def write_feature_csv(table: FeatureTable, path, header_comment: str | None = None) -> None:
    """Write ``cycle,label,fault,<sensor>_<stat>...`` rows.

    ``header_comment`` lines are written first, each prefixed with ``# ``.
    """
    with open(path, "w", newline="") as fh:
        for line in (header_comment or "").splitlines():
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["cycle", "label", "fault", *FEATURE_NAMES])
        for i in range(len(table)):
            w.writerow([int(table.cycles[i]), "anomaly" if table.labels[i] else "normal",
                        FAULT_NAMES[table.faults[i]], *(repr(float(v)) for v in table.X[i])])


def read_feature_csv(path) -> FeatureTable:
    with open(path, newline="") as fh:
        r = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(r, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        if tuple(header[3:]) != FEATURE_NAMES:
            raise ValueError(f"{path}: unexpected feature header")
        rows = list(r)
    return FeatureTable(
        [[float(v) for v in row[3:]] for row in rows],
        [row[1] == "anomaly" for row in rows],
        [FAULT_NAMES.index(row[2]) for row in rows],
        [int(row[0]) for row in rows],
    )
