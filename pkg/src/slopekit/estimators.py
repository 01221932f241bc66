"""Sequence-model estimators: observe ``y ~ N(beta, sigma^2 I)``.

These apply to orthogonal designs after replacing ``y`` by ``X'y``. The
one-step oracle is the exception: it needs the true ``beta`` and noise
``z`` and exists for simulation diagnostics only.
"""
from dataclasses import dataclass

import numpy as np

from .sorted_l1 import prox_sorted_l1, sort_order
from .weights import bh_weights

__all__ = [
    "ThresholdFit",
    "SureFit",
    "soft_threshold",
    "bh_step_up_count",
    "bh_step_down_count",
    "fdr_hard_threshold",
    "slope_orthogonal",
    "sequential_fdr_soft",
    "sure_values",
    "sure_soft_threshold",
    "one_step_oracle",
]


@dataclass
class ThresholdFit:
    beta_hat: np.ndarray
    threshold: float
    rejections: int


@dataclass
class SureFit:
    lambda_hat: float
    beta_hat: np.ndarray
    grid: np.ndarray
    sure_values: np.ndarray


def _check(y, q=None, sigma=1.0):
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("y must be a non-empty 1-D array")
    if not np.all(np.isfinite(y)):
        raise ValueError("y must be finite")
    if not (np.isfinite(sigma) and sigma > 0):
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    if q is not None and not (0.0 < q < 1.0):
        raise ValueError(f"q must lie in (0, 1), got {q!r}")
    return y


def soft_threshold(y, t):
    return np.sign(y) * np.maximum(np.abs(y) - t, 0.0)


def bh_step_up_count(y, q, sigma=1.0):
    """Largest ``i`` with ``|y|_(i) / sigma >= lambda^BH_i``, or 0."""
    y = _check(y, q, sigma)
    crit = bh_weights(q, y.size)
    mags = np.sort(np.abs(y))[::-1] / sigma
    hits = np.flatnonzero(mags >= crit)
    return int(hits[-1]) + 1 if hits.size else 0


def bh_step_down_count(y, q, sigma=1.0):
    """Number of leading ``i`` with ``|y|_(j) / sigma >= lambda^BH_j`` for all ``j <= i``."""
    y = _check(y, q, sigma)
    crit = bh_weights(q, y.size)
    mags = np.sort(np.abs(y))[::-1] / sigma
    fails = np.flatnonzero(mags < crit)
    return int(fails[0]) if fails.size else y.size


def fdr_hard_threshold(y, q, sigma=1.0):
    """Keep ``y_i`` when ``|y_i|`` reaches the BH step-up threshold.

    With no rejection the threshold is ``inf`` and the estimate is zero.
    """
    y = _check(y, q, sigma)
    R = bh_step_up_count(y, q, sigma)
    if R == 0:
        return ThresholdFit(np.zeros_like(y), np.inf, 0)
    t = np.sort(np.abs(y))[::-1][R - 1]
    return ThresholdFit(np.where(np.abs(y) >= t, y, 0.0), float(t), R)


def slope_orthogonal(y, lam):
    """SLOPE estimate for an orthogonal design given ``y = X'y_obs``."""
    return prox_sorted_l1(y, lam)


def sequential_fdr_soft(y, q, sigma=1.0):
    """Soft-threshold the ``i``-th largest ``|y|`` at ``sigma * lambda^BH_i``.

    Ranks come from a stable sort. The map is neither monotone nor
    continuous in ``y``.
    """
    y = _check(y, q, sigma)
    order = sort_order(y)
    shrink = np.empty_like(y)
    shrink[order] = sigma * bh_weights(q, y.size)
    return soft_threshold(y, shrink)


def sure_values(y, sigma, lams):
    """SURE for soft thresholding at each threshold in ``lams``."""
    y = np.asarray(y, dtype=float)
    lams = np.asarray(lams, dtype=float)
    y2 = np.sort(y * y)
    csum = np.concatenate(([0.0], np.cumsum(y2)))
    # number of |y_i| <= lam, via the sorted squares
    cnt = np.searchsorted(y2, lams * lams, side="right")
    capped = csum[cnt] + (y.size - cnt) * lams * lams
    return y.size * sigma**2 + capped - 2.0 * sigma**2 * cnt


def sure_soft_threshold(y, sigma=1.0, grid=(0.0,)):
    """Soft thresholding at the SURE-minimizing threshold.

    SURE is evaluated on ``grid`` together with every ``|y_i|``. Between
    consecutive ``|y_i|`` it increases in the threshold, so this union
    contains the minimizer over ``[0, inf)`` whenever 0 is in ``grid``.
    Ties go to the smallest threshold.
    """
    y = _check(y, None, sigma)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a non-empty 1-D sequence")
    if np.any(np.diff(grid) <= 0) or grid[0] < 0:
        raise ValueError("grid must be strictly increasing and nonnegative")
    full = np.unique(np.concatenate((grid, np.abs(y))))
    values = sure_values(y, sigma, full)
    best = int(np.argmin(values))
    lam = float(full[best])
    return SureFit(lam, soft_threshold(y, lam), full, values)


def one_step_oracle(X, z, beta, lam):
    """One proximal-gradient step from the truth: ``prox(beta + X'z)``."""
    X = np.asarray(X, dtype=float)
    z = np.asarray(z, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if X.ndim != 2 or z.shape != (X.shape[0],) or beta.shape != (X.shape[1],):
        raise ValueError("dimension mismatch between X, z and beta")
    return prox_sorted_l1(beta + X.T @ z, lam)
