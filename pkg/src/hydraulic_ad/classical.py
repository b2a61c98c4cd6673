"""Stand-alone baseline detectors: robust covariance, LOF and one-class SVM."""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy.spatial.distance import cdist

from .base import BaseDetector
from .exceptions import TrainingError
from .numerics import make_rng, row_matmul

logger = logging.getLogger(__name__)

LRD_EPS = 1e-12


# --------------------------------------------------------------------------
# robust covariance (MCD concentration steps)

def _floored_cov(X: np.ndarray, floor_ratio: float) -> np.ndarray:
    cov = np.cov(X, rowvar=False, bias=True).reshape(X.shape[1], X.shape[1])
    return floor_covariance(cov, floor_ratio)


def floor_covariance(cov: np.ndarray, floor_ratio: float = 1e-6) -> np.ndarray:
    """Symmetrise and clip eigenvalues at ``floor_ratio * trace / dim``."""
    cov = (cov + cov.T) / 2
    d = cov.shape[0]
    floor = floor_ratio * np.trace(cov) / d
    if floor <= 0:
        floor = floor_ratio
    w, V = np.linalg.eigh(cov)
    w = np.maximum(w, floor)
    return (V * w) @ V.T


def mahalanobis(X, location, precision) -> np.ndarray:
    """sqrt((x - mu)^T P (x - mu)) per row."""
    D = np.atleast_2d(np.asarray(X, dtype=float)) - location
    q = np.einsum("ij,jk,ik->i", D, precision, D)
    return np.sqrt(np.maximum(q, 0.0))


def fit_mcd(X, support_fraction=0.75, n_restarts=20, max_steps=30, floor_ratio=1e-6, seed=0):
    """Minimum-covariance-determinant style location/covariance estimate.

    Each restart draws a random (dim+1)-subset, then repeatedly refits on
    the ``ceil(support_fraction * n)`` points closest in Mahalanobis
    distance until the log-determinant stops decreasing. The restart with
    the smallest determinant wins.

    Returns ``(location, covariance, support_indices)``.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if not (0.5 < support_fraction <= 1):
        raise ValueError(f"support_fraction must lie in (0.5, 1], got {support_fraction}")
    h = math.ceil(support_fraction * n)
    if h < d + 1:
        raise ValueError(f"support size {h} is smaller than dim+1 = {d + 1}")
    rng = make_rng(seed)
    best = (np.inf, None, None, None)
    for _ in range(n_restarts):
        idx = rng.choice(n, size=min(d + 1, n), replace=False)
        loc = X[idx].mean(axis=0)
        cov = _floored_cov(X[idx], floor_ratio)
        prev = np.inf
        for _ in range(max_steps):
            dist = mahalanobis(X, loc, np.linalg.inv(cov))
            idx = np.sort(np.argsort(dist, kind="stable")[:h])
            loc = X[idx].mean(axis=0)
            cov = _floored_cov(X[idx], floor_ratio)
            logdet = np.linalg.slogdet(cov)[1]
            if logdet >= prev:
                break
            prev = logdet
        if logdet < best[0]:
            best = (logdet, loc, cov, idx)
    return best[1], best[2], best[3]


class RobustCovariance(BaseDetector):
    """Mahalanobis distance to an MCD-style robust Gaussian fit."""

    _state_keys = ("location_", "covariance_", "precision_")

    def __init__(self, support_fraction=0.75, n_restarts=20, max_steps=30, floor_ratio=1e-6,
                 threshold_policy="percentile", percentile=99.0, gamma=1.0,
                 standardize=True, random_state=0):
        self.support_fraction = support_fraction
        self.n_restarts = n_restarts
        self.max_steps = max_steps
        self.floor_ratio = floor_ratio
        self.threshold_policy = threshold_policy
        self.percentile = percentile
        self.gamma = gamma
        self.standardize = standardize
        self.random_state = random_state

    def _fit(self, X):
        self.location_, self.covariance_, self.support_ = fit_mcd(
            X, self.support_fraction, self.n_restarts, self.max_steps, self.floor_ratio,
            self.random_state,
        )
        w, V = np.linalg.eigh(self.covariance_)
        self.precision_ = (V / w) @ V.T

    def _score(self, X):
        return mahalanobis(X, self.location_, self.precision_)


# --------------------------------------------------------------------------
# local outlier factor

def _knn(D: np.ndarray, k: int) -> np.ndarray:
    return np.argsort(D, axis=1, kind="stable")[:, :k]


class LocalOutlierFactor(BaseDetector):
    """LOF of query points against a fixed reference set of normal samples.

    Neighbours are the ``n_neighbors`` nearest references (ties broken by
    reference order); a training point is never its own neighbour.
    """

    _state_keys = ("references_", "k_distance_", "lrd_")

    def __init__(self, n_neighbors=20, threshold_policy="percentile", percentile=99.0,
                 gamma=1.0, standardize=True, random_state=0):
        self.n_neighbors = n_neighbors
        self.threshold_policy = threshold_policy
        self.percentile = percentile
        self.gamma = gamma
        self.standardize = standardize
        self.random_state = random_state

    def _fit(self, X):
        k = self.n_neighbors
        if not (1 <= k < X.shape[0]):
            raise ValueError(f"n_neighbors must satisfy 1 <= k < n_samples ({X.shape[0]}), got {k}")
        D = cdist(X, X)
        np.fill_diagonal(D, np.inf)
        nbrs = _knn(D, k)
        rows = np.arange(X.shape[0])[:, None]
        self.references_ = X.copy()
        self.k_distance_ = D[rows, nbrs[:, -1:]][:, 0]
        reach = np.maximum(self.k_distance_[nbrs], D[rows, nbrs])
        self.lrd_ = 1.0 / np.maximum(reach.mean(axis=1), LRD_EPS)

    def _score(self, X):
        k = self.n_neighbors
        D = cdist(X, self.references_)
        nbrs = _knn(D, k)
        rows = np.arange(X.shape[0])[:, None]
        reach = np.maximum(self.k_distance_[nbrs], D[rows, nbrs])
        lrd = 1.0 / np.maximum(reach.mean(axis=1), LRD_EPS)
        return self.lrd_[nbrs].mean(axis=1) / lrd


# --------------------------------------------------------------------------
# one-class SVM

def rbf_kernel(A, B, sigma: float) -> np.ndarray:
    return np.exp(-cdist(A, B, "sqeuclidean") / (2.0 * sigma * sigma))


def median_heuristic(X) -> float:
    d = cdist(X, X)
    iu = np.triu_indices(X.shape[0], k=1)
    med = float(np.median(d[iu])) if iu[0].size else 1.0
    return med if med > 0 else 1.0


def solve_oneclass_dual(Q: np.ndarray, nu: float, tol: float = 1e-4, max_iter: int = 200_000):
    """SMO for min 1/2 a^T Q a s.t. 0 <= a_i <= 1/(nu N), sum a = 1.

    Each step moves mass between the maximal violating pair. Returns
    ``(alpha, rho, n_iter)`` with ``rho`` averaged over free support
    vectors, or the midpoint of the feasible interval when none is free.
    """
    n = Q.shape[0]
    if not (0 < nu <= 1):
        raise ValueError(f"nu must lie in (0, 1], got {nu}")
    C = 1.0 / (nu * n)
    alpha = np.zeros(n)
    n_full = min(int(math.floor(nu * n)), n)
    alpha[:n_full] = C
    if n_full < n:
        alpha[n_full] = 1.0 - n_full * C
    alpha = np.clip(alpha, 0.0, C)
    G = Q @ alpha
    diag = np.diag(Q)
    bound_eps = 1e-12 * C
    for it in range(max_iter):
        up = alpha < C - bound_eps
        low = alpha > bound_eps
        Gup = np.where(up, G, np.inf)
        Glow = np.where(low, G, -np.inf)
        i = int(np.argmin(Gup))
        j = int(np.argmax(Glow))
        gap = Glow[j] - Gup[i]
        if gap <= tol:
            break
        eta = max(diag[i] + diag[j] - 2.0 * Q[i, j], 1e-12)
        t = min(gap / eta, C - alpha[i], alpha[j])
        alpha[i] += t
        alpha[j] -= t
        G += t * (Q[:, i] - Q[:, j])
    else:
        raise TrainingError(f"one-class SVM did not converge in {max_iter} iterations "
                            f"(KKT violation {gap:.3g} > {tol})")
    alpha = np.clip(alpha, 0.0, C)
    free = (alpha > bound_eps) & (alpha < C - bound_eps)
    if free.any():
        rho = float(G[free].mean())
    else:
        at_upper = alpha >= C - bound_eps
        lo = G[at_upper].max() if at_upper.any() else -np.inf
        hi = G[~at_upper].min() if (~at_upper).any() else np.inf
        rho = float((lo + hi) / 2) if np.isfinite(lo) and np.isfinite(hi) else float(
            lo if np.isfinite(lo) else hi)
    return alpha, rho, it


class OneClassSVM(BaseDetector):
    """nu one-class SVM with RBF kernel, trained by SMO.

    ``sigma=None`` uses the median pairwise training distance.
    Score is ``rho - sum_i alpha_i K(x_i, x)``.
    """

    _state_keys = ("support_vectors_", "dual_coef_", "rho_", "sigma_")

    def __init__(self, nu=0.05, sigma=None, tol=1e-4, max_iter=200_000,
                 threshold_policy="percentile", percentile=99.0, gamma=1.0,
                 standardize=True, random_state=0):
        self.nu = nu
        self.sigma = sigma
        self.tol = tol
        self.max_iter = max_iter
        self.threshold_policy = threshold_policy
        self.percentile = percentile
        self.gamma = gamma
        self.standardize = standardize
        self.random_state = random_state

    def _fit(self, X):
        if self.sigma is not None and self.sigma <= 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        self.sigma_ = float(self.sigma) if self.sigma is not None else median_heuristic(X)
        Q = rbf_kernel(X, X, self.sigma_)
        alpha, rho, n_iter = solve_oneclass_dual(Q, self.nu, self.tol, self.max_iter)
        self.alpha_ = alpha
        self.n_iter_ = n_iter
        sv = alpha > 0
        self.support_vectors_ = X[sv].copy()
        self.dual_coef_ = alpha[sv]
        self.rho_ = rho
        logger.debug("OC-SVM: %d support vectors after %d SMO steps", sv.sum(), n_iter)

    def _load_state_arrays(self, arrays):
        super()._load_state_arrays(arrays)
        self.rho_ = float(self.rho_)
        self.sigma_ = float(self.sigma_)

    def _score(self, X):
        return self.rho_ - row_matmul(rbf_kernel(X, self.support_vectors_, self.sigma_), self.dual_coef_)
