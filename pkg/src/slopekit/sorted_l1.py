"""Sorted L1 norm, its proximal operator and majorization predicates.

All functions take and return plain 1-D float arrays. A weight vector is a
nonincreasing, nonnegative sequence whose first entry is positive; see
:func:`as_weights`.
"""
import numpy as np
from numba import njit

__all__ = [
    "as_weights",
    "sort_order",
    "sorted_l1_norm",
    "majorizes",
    "prox_sorted_l1",
    "prox_norm_bound_holds",
    "isotonic_nonincreasing",
    "AGREEMENT_TOL",
]

# stack and PAVA routes are exact finite algorithms; anything above this is a bug
AGREEMENT_TOL = 1e-12


def as_weights(values):
    """Validate a penalty sequence and return it as a float array.

    Raises
    ------
    ValueError
        If the sequence is empty, non-finite, increasing somewhere, negative,
        or identically zero.
    """
    lam = np.asarray(values, dtype=float)
    if lam.ndim != 1 or lam.size == 0:
        raise ValueError("weights must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(lam)):
        raise ValueError("weights must be finite")
    if np.any(np.diff(lam) > 0):
        raise ValueError("weights must be nonincreasing")
    if lam[-1] < 0:
        raise ValueError("weights must be nonnegative")
    if lam[0] <= 0:
        raise ValueError("weights must not be all zero")
    return lam


def _vector(a, name="vector"):
    a = np.asarray(a, dtype=float)
    if a.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {a.shape}")
    return a


def _check_same_length(a, b, what="lengths"):
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"{what} differ: {a.shape[0]} != {b.shape[0]}")


def sort_order(a):
    """Permutation sorting ``|a|`` nonincreasingly; ties keep index order."""
    return np.argsort(-np.abs(np.asarray(a, dtype=float)), kind="stable")


def sorted_l1_norm(b, lam):
    """Return ``sum_i lam[i] * |b|_(i)`` where ``|b|_(1) >= |b|_(2) >= ...``."""
    b = _vector(b, "b")
    lam = _vector(lam, "lambda")
    _check_same_length(b, lam)
    mags = np.sort(np.abs(b))[::-1]
    return float(np.dot(lam, mags))


def majorizes(a, b, atol=0.0):
    """True iff every prefix sum of sorted ``|a|`` dominates that of ``|b|``.

    ``atol`` is an absolute slack allowed on each prefix-sum comparison; the
    default of zero is the exact definition.
    """
    a = _vector(a, "a")
    b = _vector(b, "b")
    _check_same_length(a, b)
    ca = np.cumsum(np.sort(np.abs(a))[::-1])
    cb = np.cumsum(np.sort(np.abs(b))[::-1])
    return bool(np.all(cb <= ca + atol))


@njit(cache=True, nogil=True)
def _prox_stack_sorted(y, lam):
    # y nonnegative and nonincreasing; single pass with a stack of blocks
    p = y.shape[0]
    start = np.empty(p, np.int64)
    end = np.empty(p, np.int64)
    total = np.empty(p)
    value = np.empty(p)
    k = 0
    for i in range(p):
        start[k] = i
        end[k] = i
        total[k] = y[i] - lam[i]
        value[k] = total[k]
        while k > 0 and value[k - 1] <= value[k]:
            k -= 1
            end[k] = i
            total[k] += total[k + 1]
            value[k] = total[k] / (i - start[k] + 1)
        k += 1
    x = np.empty(p)
    for j in range(k):
        d = value[j] if value[j] > 0.0 else 0.0
        for i in range(start[j], end[j] + 1):
            x[i] = d
    return x


def isotonic_nonincreasing(v):
    """Least-squares nonincreasing fit to ``v`` by pooling adjacent violators.

    Each pass sweeps left to right and pools every block into its left
    neighbour when the neighbour's mean is smaller; passes repeat until no
    violator remains.
    """
    v = _vector(v, "v")
    means = [float(x) for x in v]
    sizes = [1] * len(means)
    changed = True
    while changed:
        changed = False
        new_means, new_sizes = [], []
        for m, s in zip(means, sizes):
            if new_means and new_means[-1] < m:
                w = new_sizes[-1] + s
                new_means[-1] = (new_means[-1] * new_sizes[-1] + m * s) / w
                new_sizes[-1] = w
                changed = True
            else:
                new_means.append(m)
                new_sizes.append(s)
        means, sizes = new_means, new_sizes
    return np.repeat(np.array(means), sizes)


def _prox_pava_sorted(y, lam):
    return np.maximum(isotonic_nonincreasing(y - lam), 0.0)


def prox_sorted_l1(y, lam, method="stack", debug=False):
    """Proximal operator of the sorted L1 norm.

    Solves ``argmin_b 0.5 * ||y - b||^2 + sum_i lam[i] * |b|_(i)`` by sorting
    the magnitudes of ``y``, solving the ordered problem, then undoing the
    sort and restoring signs.

    Parameters
    ----------
    y : array_like, shape (p,)
    lam : array_like, shape (p,)
        Nonincreasing nonnegative weights.
    method : {"stack", "pava"}
        ``"stack"`` is the single-pass block-merging algorithm; ``"pava"``
        fits an isotonic regression to ``|y|_sorted - lam`` and clamps at 0.
    debug : bool
        Run both algorithms and raise ``AssertionError`` if any coordinate
        differs by more than ``AGREEMENT_TOL``.

    Returns
    -------
    ndarray, shape (p,)
    """
    y = _vector(y, "y")
    lam = _vector(lam, "lambda")
    _check_same_length(y, lam)
    order = sort_order(y)
    mags = np.abs(y)[order]
    if method == "stack":
        x = _prox_stack_sorted(mags, lam)
    elif method == "pava":
        x = _prox_pava_sorted(mags, lam)
    else:
        raise ValueError(f"unknown prox method {method!r}")
    if debug:
        other = _prox_pava_sorted(mags, lam) if method == "stack" else _prox_stack_sorted(mags, lam)
        gap = np.max(np.abs(x - other)) if x.size else 0.0
        assert gap <= AGREEMENT_TOL, f"stack and PAVA prox disagree by {gap:.3e}"
    out = np.empty_like(x)
    out[order] = x
    return np.sign(y) * out


def prox_norm_bound_holds(a, lam, atol=0.0):
    """Check ``||prox(a)|| <= ||(|a| - lam)_+||`` with ``|a|`` in index order."""
    a = _vector(a, "a")
    lam = _vector(lam, "lambda")
    _check_same_length(a, lam)
    lhs = np.linalg.norm(prox_sorted_l1(a, lam))
    rhs = np.linalg.norm(np.maximum(np.abs(a) - lam, 0.0))
    return bool(lhs <= rhs + atol)
