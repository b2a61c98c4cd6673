"""Isolation forest with axis-parallel random splits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base import BaseDetector
from .numerics import make_rng

EULER_GAMMA = 0.5772156649015329


def harmonic_c(n) -> float:
    """Average unsuccessful-search path length in a BST of ``n`` nodes.

    c(1) = 0 and c(n) = 2 H(n-1) - 2 (n-1)/n with H(i) = ln(i) + Euler's constant.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n == 1:
        return 0.0
    return 2.0 * (math.log(n - 1) + EULER_GAMMA) - 2.0 * (n - 1) / n


_harmonic_c_vec = np.vectorize(harmonic_c, otypes=[float])


@dataclass
class IsoTree:
    """Flat binary tree. ``feature == -1`` marks a leaf whose ``size`` is set."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray
    depth: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def leaf_of(self, X) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] < self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active[idx] = self.feature[node[idx]] >= 0
        return node


def build_tree(X: np.ndarray, height_limit: int, rng: np.random.Generator) -> IsoTree:
    feature, threshold, left, right, size, depth = [], [], [], [], [], []

    def new_node(d):
        for lst, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1), (size, 0), (depth, d)):
            lst.append(v)
        return len(feature) - 1

    stack = [(new_node(0), np.arange(X.shape[0]))]
    while stack:
        node, rows = stack.pop()
        d = depth[node]
        sub = X[rows]
        lo, hi = sub.min(axis=0), sub.max(axis=0)
        splittable = np.flatnonzero(hi > lo)
        if d >= height_limit or rows.size <= 1 or splittable.size == 0:
            size[node] = rows.size
            continue
        q = int(splittable[rng.integers(splittable.size)])
        v = rng.uniform(lo[q], hi[q])
        while not (lo[q] < v < hi[q]):
            v = rng.uniform(lo[q], hi[q])
        mask = sub[:, q] < v
        feature[node], threshold[node] = q, v
        left[node] = new_node(d + 1)
        right[node] = new_node(d + 1)
        stack.append((right[node], rows[~mask]))
        stack.append((left[node], rows[mask]))
    return IsoTree(
        np.array(feature, dtype=np.int64), np.array(threshold, dtype=float),
        np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
        np.array(size, dtype=np.int64), np.array(depth, dtype=np.int64),
    )


def path_length(tree: IsoTree, X) -> np.ndarray:
    """Edges to the reached leaf plus c(leaf size)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    leaf = tree.leaf_of(X)
    return tree.depth[leaf] + _harmonic_c_vec(tree.size[leaf])


def score_from_path(mean_path, c_psi: float) -> np.ndarray:
    return np.power(2.0, -np.asarray(mean_path, dtype=float) / c_psi)


class IsolationForest(BaseDetector):
    """Isolation forest; score s(x) = 2^(-E[h(x)] / c(psi)), in (0, 1).

    ``max_samples="auto"`` uses min(256, n_train); an explicit value larger
    than the training set is an error. Standardisation is off by default
    since splits are scale-free.
    """

    _TREE_FIELDS = ("feature", "threshold", "left", "right", "size", "depth")

    def __init__(self, n_estimators=100, max_samples="auto", threshold_policy="percentile",
                 percentile=99.0, gamma=1.0, standardize=False, random_state=0):
        self.n_estimators = n_estimators
        self.max_samples = max_samples
        self.threshold_policy = threshold_policy
        self.percentile = percentile
        self.gamma = gamma
        self.standardize = standardize
        self.random_state = random_state

    def _fit(self, X):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        n = X.shape[0]
        if self.max_samples == "auto":
            psi = min(256, n)
        elif self.max_samples > n:
            raise ValueError(f"max_samples={self.max_samples} exceeds training size {n}")
        else:
            psi = int(self.max_samples)
        if psi < 2:
            raise ValueError("isolation forest needs at least 2 training samples")
        self.psi_ = psi
        self.c_psi_ = harmonic_c(psi)
        height = math.ceil(math.log2(psi))
        seeds = np.random.SeedSequence(self.random_state).spawn(self.n_estimators)
        self.trees_ = []
        for ss in seeds:
            rng = make_rng(ss)
            rows = rng.choice(n, size=psi, replace=False)
            self.trees_.append(build_tree(X[rows], height, rng))

    def mean_path_length(self, X) -> np.ndarray:
        return self._mean_path(self._transform(X))

    def _mean_path(self, X):
        # tree-by-tree accumulation keeps each row's sum independent of batch shape
        total = np.zeros(X.shape[0])
        for t in self.trees_:
            total += path_length(t, X)
        return total / len(self.trees_)

    def _score(self, X):
        return score_from_path(self._mean_path(X), self.c_psi_)

    def _state_arrays(self):
        out = {"psi": np.asarray(self.psi_),
               "offsets": np.cumsum([0] + [t.n_nodes for t in self.trees_])}
        for f in self._TREE_FIELDS:
            out[f] = np.concatenate([getattr(t, f) for t in self.trees_])
        return out

    def _load_state_arrays(self, arrays):
        self.psi_ = int(arrays["psi"])
        self.c_psi_ = harmonic_c(self.psi_)
        off = arrays["offsets"]
        self.trees_ = [
            IsoTree(*(arrays[f][off[i]:off[i + 1]] for f in self._TREE_FIELDS))
            for i in range(len(off) - 1)
        ]
