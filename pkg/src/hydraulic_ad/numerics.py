"""Deterministic numeric kernel shared by the feature extractor and detectors.

Random numbers come from NumPy's ``PCG64`` bit generator seeded explicitly
through :func:`make_rng`; the PCG64 stream is specified by NumPy and is
identical across platforms for a given seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DataError

#: Variance below which skewness and kurtosis are reported as zero.
ZERO_VARIANCE_EPS = 1e-12


@dataclass(frozen=True)
class Moments:
    """Population moments of a series (kurtosis is non-excess)."""

    mean: float
    variance: float
    skewness: float
    kurtosis: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.mean, self.variance, self.skewness, self.kurtosis)


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    """Return a PCG64-backed generator for ``seed``."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def _check_finite(a: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(a)):
        raise DataError(f"{what} contains non-finite values")


def moment_rows(series: np.ndarray) -> np.ndarray:
    """Vectorised :func:`moments` over the rows of a 2-D array.

    Returns an ``(n_rows, 4)`` array of (mean, variance, skewness, kurtosis).
    """
    a = np.asarray(series, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {a.shape}")
    if a.shape[1] == 0:
        raise ValueError("series must be non-empty")
    _check_finite(a, "series")
    mean = a.mean(axis=1)
    dev = a - mean[:, None]
    sq = dev * dev
    m2 = sq.mean(axis=1)
    m3 = (sq * dev).mean(axis=1)
    m4 = (sq * sq).mean(axis=1)
    flat = m2 < ZERO_VARIANCE_EPS
    safe = np.where(flat, 1.0, m2)
    skew = np.where(flat, 0.0, m3 / safe**1.5)
    kurt = np.where(flat, 0.0, m4 / safe**2)
    return np.column_stack([mean, m2, skew, kurt])


def moments(series) -> Moments:
    """Population mean, variance, skewness and (non-excess) kurtosis.

    Skewness and kurtosis are defined as 0 when the variance is below
    :data:`ZERO_VARIANCE_EPS`.
    """
    a = np.asarray(series, dtype=float).ravel()
    if a.size == 0:
        raise ValueError("series must be non-empty")
    row = moment_rows(a[None, :])[0]
    return Moments(*(float(v) for v in row))


def ridge_solve(H, T, C: float) -> np.ndarray:
    """Regularised least squares: argmin ||H b - T||^2 + ||b||^2 / C.

    Uses the primal normal equations when ``H`` has at most as many columns
    as rows and the dual (kernel) form otherwise. A 1-D ``T`` gives a 1-D
    result.
    """
    H = np.asarray(H, dtype=float)
    T = np.asarray(T, dtype=float)
    if H.ndim != 2:
        raise ValueError(f"H must be 2-D, got shape {H.shape}")
    vector_target = T.ndim == 1
    if vector_target:
        T = T[:, None]
    if T.ndim != 2 or T.shape[0] != H.shape[0]:
        raise ValueError(f"row mismatch: H is {H.shape}, T is {T.shape}")
    if not (C > 0) or not math.isfinite(C):
        raise ValueError(f"C must be a positive finite number, got {C}")
    _check_finite(H, "H")
    _check_finite(T, "T")
    n, L = H.shape
    if L <= n:
        A = H.T @ H
        A[np.diag_indices_from(A)] += 1.0 / C
        beta = np.linalg.solve(A, H.T @ T)
    else:
        A = H @ H.T
        A[np.diag_indices_from(A)] += 1.0 / C
        beta = H.T @ np.linalg.solve(A, T)
    return beta[:, 0] if vector_target else beta


def percentile(values, p: float) -> float:
    """Nearest-rank percentile: element ``ceil(p/100 * n)`` (1-based) of the sorted values."""
    a = np.asarray(values, dtype=float).ravel()
    if a.size == 0:
        raise ValueError("values must be non-empty")
    if not (0 < p <= 100):
        raise ValueError(f"p must lie in (0, 100], got {p}")
    # p/100*n is computed as p*n/100 so integer products stay exact
    rank = math.ceil(p * a.size / 100.0)
    rank = min(max(rank, 1), a.size)
    return float(np.sort(a)[rank - 1])


def row_matmul(A, B) -> np.ndarray:
    """``A @ B`` computed so each output row depends only on its input row.

    BLAS kernels pick different blockings for different batch sizes, which
    changes the last bits of a row's result; scores must not depend on what
    else is scored alongside them.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    return np.einsum("ij,jk->ik" if B.ndim == 2 else "ij,j->i", A, B)


def sigmoid(x) -> np.ndarray:
    """Elementwise logistic function 1 / (1 + exp(-x))."""
    x = np.asarray(x, dtype=float)
    _check_finite(x, "input")
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


sigmoid_map = sigmoid
