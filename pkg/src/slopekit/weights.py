"""Penalty schedules built from normal quantiles.

The Benjamini-Hochberg critical values ``Phi^{-1}(1 - i q / (2p))`` need
quantiles far in the upper tail (``q / (2p)`` can be ~1e-8), so the
quantile routine works on the smaller of ``alpha`` and ``1 - alpha`` and
refines a rational approximation with one Newton step against ``erfc``.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, erfc

__all__ = [
    "normal_cdf",
    "normal_quantile",
    "upper_normal_quantile",
    "bh_weights",
    "sqrtlog_weights",
    "weight_energy",
    "WeightSchedule",
]

_SQRT2 = np.sqrt(2.0)
_SQRT2PI = np.sqrt(2.0 * np.pi)

# Acklam's rational approximation, relative error about 1.15e-9
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def normal_cdf(x):
    """Standard normal CDF, accurate in both tails."""
    return 0.5 * erfc(-np.asarray(x, dtype=float) / _SQRT2)


def _poly(coefs, t):
    out = np.zeros_like(t)
    for c in coefs:
        out = out * t + c
    return out


def _lower_tail(pl):
    # quantile for 0 < pl < P_LOW, negative result
    t = np.sqrt(-2.0 * np.log(pl))
    x = _poly(_C, t) / (_poly(_D, t) * t + 1.0)
    r = 0.5 * erfc(-x / _SQRT2) - pl
    return x - r * _SQRT2PI * np.exp(0.5 * x * x)


def _central(alpha):
    u = alpha - 0.5
    r2 = u * u
    x = _poly(_A, r2) * u / (_poly(_B, r2) * r2 + 1.0)
    # residual measured from the median keeps relative accuracy near x = 0
    r = 0.5 * erf(x / _SQRT2) - u
    return x - r * _SQRT2PI * np.exp(0.5 * x * x)


def normal_quantile(alpha):
    """Inverse of the standard normal CDF.

    Parameters
    ----------
    alpha : float or array_like
        Probabilities strictly inside (0, 1).

    Returns
    -------
    float or ndarray
        ``x`` with ``Phi(x) = alpha``; relative error below 1e-13 for
        ``alpha`` in ``[1e-300, 1 - 1e-16]``.
    """
    a = np.asarray(alpha, dtype=float)
    if np.any(~((a > 0.0) & (a < 1.0))):
        raise ValueError("alpha must lie strictly between 0 and 1")
    x = np.empty_like(a)
    low = a < _P_LOW
    high = a > 1.0 - _P_LOW
    mid = ~(low | high)
    if np.any(low):
        x[low] = _lower_tail(a[low])
    if np.any(high):
        # 1 - a is exact here
        x[high] = -_lower_tail(1.0 - a[high])
    if np.any(mid):
        x[mid] = _central(a[mid])
    return float(x) if x.ndim == 0 else x


def upper_normal_quantile(tail):
    """``Phi^{-1}(1 - tail)`` computed without forming ``1 - tail``."""
    return -normal_quantile(tail)


def _check_count(p, name="p"):
    if int(p) != p or p < 1:
        raise ValueError(f"{name} must be a positive integer, got {p!r}")
    return int(p)


def _check_sigma(sigma):
    if not (np.isfinite(sigma) and sigma > 0):
        raise ValueError(f"sigma must be positive and finite, got {sigma!r}")
    return float(sigma)


def bh_weights(q, p, sigma=1.0, epsilon=0.0):
    """BH critical values ``sigma * (1 + epsilon) * Phi^{-1}(1 - i q / (2p))``.

    Returns a strictly decreasing array of length ``p``.
    """
    if not (0.0 < q < 1.0):
        raise ValueError(f"q must lie in (0, 1), got {q!r}")
    if not (np.isfinite(epsilon) and epsilon >= 0):
        raise ValueError(f"epsilon must be nonnegative, got {epsilon!r}")
    p = _check_count(p)
    sigma = _check_sigma(sigma)
    i = np.arange(1, p + 1, dtype=float)
    return sigma * (1.0 + epsilon) * upper_normal_quantile(i * q / (2.0 * p))


def sqrtlog_weights(p, sigma=1.0):
    """Weights ``sigma * sqrt(2 log(p / j))``; the last entry is exactly 0."""
    p = _check_count(p)
    sigma = _check_sigma(sigma)
    j = np.arange(1, p + 1, dtype=float)
    lam = sigma * np.sqrt(2.0 * np.log(p / j))
    lam[-1] = 0.0
    return lam


def weight_energy(lam, k):
    """Sum of squares of the ``k`` largest weights."""
    lam = np.asarray(lam, dtype=float)
    if int(k) != k or not (1 <= k <= lam.shape[0]):
        raise ValueError(f"k must be in 1..{lam.shape[0]}, got {k!r}")
    return float(np.sum(lam[: int(k)] ** 2))


@dataclass(frozen=True)
class WeightSchedule:
    """Recipe for a weight vector.

    ``kind`` is ``"bh"`` (inflated by ``1 + epsilon`` when ``epsilon > 0``)
    or ``"sqrtlog"``.
    """

    kind: str
    p: int
    sigma: float = 1.0
    q: float = 0.1
    epsilon: float = 0.0

    def __post_init__(self):
        if self.kind not in ("bh", "sqrtlog"):
            raise ValueError(f"unknown weight kind {self.kind!r}")

    def materialize(self):
        if self.kind == "bh":
            return bh_weights(self.q, self.p, self.sigma, self.epsilon)
        return (1.0 + self.epsilon) * sqrtlog_weights(self.p, self.sigma)
