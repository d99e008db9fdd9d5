"""Distance kernels: Euclidean, sliding-window minimum, and banded DTW.

DTW uses squared pointwise differences as the cell cost and returns the
accumulated cost without a square root; 1-NN decisions are invariant to that
monotone transform and it keeps the kernels comparable across
implementations. The band is Sakoe-Chiba style: cell (i, j) is legal iff
``|i - j| <= ceil(fraction * m)``.

Only equal-length series are accepted; unequal lengths are rejected, never
padded.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from numpy.lib.stride_tricks import sliding_window_view

from .data import Dataset, Instance, z_normalize
from .errors import DimensionError, StatisticsError

__all__ = [
    "WarpingWindow",
    "DtwVariant",
    "euclidean_dist",
    "sdist",
    "dtw",
    "dtw_d",
    "dtw_i",
    "dtw_a_select",
    "z_normalize_rows",
]


@dataclass(frozen=True)
class WarpingWindow:
    """Band half-width as a fraction of the series length; 1 = unconstrained."""

    fraction: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise DimensionError(f"window fraction must be in [0, 1], got {self.fraction}")

    def band(self, m: int) -> int:
        # ceil(fraction * m), guarded against float noise pushing an exact
        # integer product over the next boundary (e.g. 0.1 * 100).
        return min(m, max(0, math.ceil(self.fraction * m - 1e-12)))


class DtwVariant(enum.Enum):
    INDEPENDENT = "independent"
    DEPENDENT = "dependent"
    ADAPTIVE = "adaptive"


def _as_window(window: WarpingWindow | float) -> WarpingWindow:
    if isinstance(window, WarpingWindow):
        return window
    return WarpingWindow(float(window))


def _as_series(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise DimensionError(f"{name} must be a non-empty 1-D series, got shape {arr.shape}")
    return arr


def euclidean_dist(a, b) -> float:
    """Euclidean distance between two equal-length series."""
    a = _as_series(a, "A")
    b = _as_series(b, "B")
    if a.shape[0] != b.shape[0]:
        raise DimensionError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    diff = a - b
    return float(np.sqrt(np.dot(diff, diff)))


def z_normalize_rows(windows: np.ndarray) -> np.ndarray:
    """Z-normalize along the last axis; constant rows become all zeros."""
    mean = windows.mean(axis=-1, keepdims=True)
    std = windows.std(axis=-1, keepdims=True)
    # Same constant rule as z_normalize: exact-equal rows map to zeros even
    # when their float mean (and hence std) is inexact.
    constant = (std == 0.0) | (
        windows.max(axis=-1, keepdims=True) == windows.min(axis=-1, keepdims=True)
    )
    out = (windows - mean) / np.where(constant, 1.0, std)
    if constant.any():
        out *= ~constant  # zero out constant rows
    return out


def sdist(s, t, normalize: bool = False) -> float:
    """Minimum Euclidean distance from ``s`` to any equal-length window of ``t``.

    With ``normalize=True`` the query is z-normalized once and every window is
    z-normalized before comparison, making the match amplitude/offset
    invariant.
    """
    s = _as_series(s, "S")
    t = _as_series(t, "T")
    if s.shape[0] > t.shape[0]:
        raise DimensionError(f"query length {s.shape[0]} exceeds series length {t.shape[0]}")
    windows = sliding_window_view(t, s.shape[0])
    if normalize:
        s = z_normalize(s)
        windows = z_normalize_rows(windows)
    diff = windows - s
    return float(np.sqrt(np.einsum("ij,ij->i", diff, diff).min()))


@njit(cache=True)
def _dtw_accum(a, b, band):  # pragma: no cover - exercised via dtw()
    m = a.shape[0]
    prev = np.full(m, np.inf)
    curr = np.full(m, np.inf)
    for i in range(m):
        lo = i - band
        if lo < 0:
            lo = 0
        hi = i + band
        if hi > m - 1:
            hi = m - 1
        for j in range(lo, hi + 1):
            diff = a[i] - b[j]
            cost = diff * diff
            if i == 0 and j == 0:
                best = 0.0
            else:
                best = np.inf
                if i > 0 and prev[j] < best:
                    best = prev[j]
                if j > 0 and curr[j - 1] < best:
                    best = curr[j - 1]
                if i > 0 and j > 0 and prev[j - 1] < best:
                    best = prev[j - 1]
            curr[j] = cost + best
        prev, curr = curr, prev
        curr[:] = np.inf
    return prev[m - 1]


@njit(cache=True)
def _dtw_accum_multi(a, b, band):  # pragma: no cover - exercised via dtw_d()
    d = a.shape[0]
    m = a.shape[1]
    prev = np.full(m, np.inf)
    curr = np.full(m, np.inf)
    for i in range(m):
        lo = i - band
        if lo < 0:
            lo = 0
        hi = i + band
        if hi > m - 1:
            hi = m - 1
        for j in range(lo, hi + 1):
            cost = 0.0
            for k in range(d):
                diff = a[k, i] - b[k, j]
                cost += diff * diff
            if i == 0 and j == 0:
                best = 0.0
            else:
                best = np.inf
                if i > 0 and prev[j] < best:
                    best = prev[j]
                if j > 0 and curr[j - 1] < best:
                    best = curr[j - 1]
                if i > 0 and j > 0 and prev[j - 1] < best:
                    best = prev[j - 1]
            curr[j] = cost + best
        prev, curr = curr, prev
        curr[:] = np.inf
    return prev[m - 1]


def dtw(a, b, window: WarpingWindow | float = 1.0) -> float:
    """Banded DTW between two equal-length univariate series."""
    a = _as_series(a, "A")
    b = _as_series(b, "B")
    if a.shape[0] != b.shape[0]:
        raise DimensionError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    band = _as_window(window).band(a.shape[0])
    return float(_dtw_accum(a, b, band))


def _as_multivariate(x, name: str) -> np.ndarray:
    if isinstance(x, Instance):
        return x.values
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D (d, m), got shape {arr.shape}")
    return arr


def dtw_d(q, c, window: WarpingWindow | float = 1.0) -> float:
    """Dependent multivariate DTW: one path over dimension-summed cell costs."""
    q = _as_multivariate(q, "Q")
    c = _as_multivariate(c, "C")
    if q.shape != c.shape:
        raise DimensionError(f"shape mismatch: {q.shape} vs {c.shape}")
    band = _as_window(window).band(q.shape[1])
    return float(_dtw_accum_multi(q, c, band))


def dtw_i(q, c, window: WarpingWindow | float = 1.0) -> float:
    """Independent multivariate DTW: per-dimension DTW distances, summed."""
    q = _as_multivariate(q, "Q")
    c = _as_multivariate(c, "C")
    if q.shape != c.shape:
        raise DimensionError(f"shape mismatch: {q.shape} vs {c.shape}")
    band = _as_window(window).band(q.shape[1])
    total = 0.0
    for k in range(q.shape[0]):
        total += float(_dtw_accum(q[k], c[k], band))
    return total


def _pairwise_dtw_matrix(dataset: Dataset, variant: DtwVariant, window: WarpingWindow) -> np.ndarray:
    n = dataset.n_instances
    fn = dtw_i if variant is DtwVariant.INDEPENDENT else dtw_d
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = fn(dataset.values[i], dataset.values[j], window)
    return out


def _loo_accuracy(dataset: Dataset, pairwise: np.ndarray) -> float:
    dist = pairwise.copy()
    np.fill_diagonal(dist, np.inf)
    correct = 0
    for i in range(dataset.n_instances):
        nearest = int(np.argmin(dist[i]))  # first minimum = lowest index on ties
        correct += dataset.labels[nearest] == dataset.labels[i]
    return correct / dataset.n_instances


def dtw_a_select(train: Dataset, window: WarpingWindow | float = 1.0) -> DtwVariant:
    """Pick the multivariate DTW flavor by leave-one-out 1-NN accuracy.

    Returns INDEPENDENT only when it strictly wins; ties go to DEPENDENT.
    """
    if train.n_instances < 2:
        raise StatisticsError("adaptive selection needs at least 2 training instances")
    window = _as_window(window)
    acc_i = _loo_accuracy(train, _pairwise_dtw_matrix(train, DtwVariant.INDEPENDENT, window))
    acc_d = _loo_accuracy(train, _pairwise_dtw_matrix(train, DtwVariant.DEPENDENT, window))
    return DtwVariant.INDEPENDENT if acc_i > acc_d else DtwVariant.DEPENDENT
