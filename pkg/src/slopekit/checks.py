"""Randomized property checks for the sorted L1 machinery.

``brute_force_prox`` solves the prox by exhaustive search over block
structures and shares no code with the stack or PAVA routes. The
``check_*`` functions return the number of failing instances out of
``n`` random draws; ``run_selfcheck`` bundles them for the CLI.
"""
from functools import lru_cache
from itertools import combinations

import numpy as np

from .sorted_l1 import majorizes, prox_sorted_l1, prox_norm_bound_holds

__all__ = [
    "brute_force_prox",
    "random_weights",
    "random_vector",
    "check_prox_oracle",
    "check_norm_majorization",
    "check_zero_prox",
    "check_residual_majorized",
    "check_restriction",
    "check_norm_bound",
    "check_monotone",
    "check_nonexpansive",
    "run_selfcheck",
]


@lru_cache(maxsize=None)
def _candidate_maps(p):
    """Linear maps sending ``v = |y|_sorted - lam`` to every block-structured candidate.

    A candidate splits ``0..p-1`` into consecutive blocks, sets each of the
    leading blocks to the block mean of ``v`` and the trailing ones to 0.
    """
    maps = []
    for ncut in range(p):
        for cuts in combinations(range(1, p), ncut):
            edges = (0,) + cuts + (p,)
            blocks = list(zip(edges[:-1], edges[1:]))
            for nz in range(len(blocks) + 1):
                A = np.zeros((p, p))
                for lo, hi in blocks[:nz]:
                    A[lo:hi, lo:hi] = 1.0 / (hi - lo)
                maps.append(A)
    return np.stack(maps)


def brute_force_prox(y, lam):
    """Prox of the sorted L1 norm by enumeration; practical for ``p <= 10``."""
    y = np.asarray(y, dtype=float)
    lam = np.asarray(lam, dtype=float)
    p = y.size
    order = np.argsort(-np.abs(y), kind="stable")
    s = np.abs(y)[order]
    cand = _candidate_maps(p) @ (s - lam)
    scale = 1e-12 * (1.0 + np.max(np.abs(s)) + lam[0])
    feasible = np.all(cand >= -scale, axis=1)
    if p > 1:
        feasible &= np.all(np.diff(cand, axis=1) <= scale, axis=1)
    cand = np.maximum(cand[feasible], 0.0)
    obj = 0.5 * np.sum((s - cand) ** 2, axis=1) + cand @ lam
    x = cand[np.argmin(obj)]
    out = np.empty(p)
    out[order] = x
    return np.sign(y) * out


def random_weights(rng, p):
    """Nonincreasing weights with occasional ties and trailing zeros."""
    lam = np.sort(rng.exponential(1.0, p))[::-1]
    if p > 1 and rng.random() < 0.2:
        i = rng.integers(0, p - 1)
        lam[i + 1] = lam[i]
    if p > 1 and rng.random() < 0.1:
        lam[rng.integers(1, p):] = 0.0
    lam[0] = max(lam[0], 1e-3)
    return lam


def random_vector(rng, p):
    """Gaussian entries at a random scale, sometimes with ties or zeros."""
    a = rng.standard_normal(p) * rng.choice([0.5, 1.0, 3.0, 10.0])
    if p > 1 and rng.random() < 0.2:
        i, j = rng.choice(p, 2, replace=False)
        a[j] = -a[i] if rng.random() < 0.5 else a[i]
    if rng.random() < 0.1:
        a[rng.integers(0, p)] = 0.0
    return a


def _tol(*arrays):
    return 1e-10 * (1.0 + sum(float(np.sum(np.abs(x))) for x in arrays))


def check_prox_oracle(n, seed=0, max_p=10, tol=1e-8):
    """Count draws where the stack prox misses the enumeration oracle or PAVA."""
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(n):
        p = int(rng.integers(1, max_p + 1))
        lam, y = random_weights(rng, p), random_vector(rng, p)
        try:
            x = prox_sorted_l1(y, lam, debug=True)
        except AssertionError:
            bad += 1
            continue
        if np.linalg.norm(x - brute_force_prox(y, lam)) > tol:
            bad += 1
    return bad


def check_norm_majorization(n, seed=0, max_p=12):
    """If ``a`` majorizes ``b`` then ``||a|| >= ||b||``."""
    rng = np.random.default_rng(seed)
    bad = tested = 0
    while tested < n:
        p = int(rng.integers(1, max_p + 1))
        b = random_vector(rng, p)
        steps = np.abs(rng.standard_normal(p)) * rng.random(p)
        a = np.sort(np.abs(b))[::-1] + np.diff(np.concatenate(([0.0], steps)))
        a = rng.permutation(a) * rng.choice([-1.0, 1.0], p)
        if not majorizes(a, b):
            continue
        tested += 1
        if np.linalg.norm(a) < np.linalg.norm(b) - _tol(a, b):
            bad += 1
    return bad


def check_zero_prox(n, seed=0, max_p=12):
    """If ``lam`` majorizes ``a`` then ``prox(a) == 0`` exactly."""
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(n):
        p = int(rng.integers(1, max_p + 1))
        lam = random_weights(rng, p)
        # shrink a random vector until lam majorizes it
        a = random_vector(rng, p)
        ca = np.cumsum(np.sort(np.abs(a))[::-1])
        ratio = np.min(np.cumsum(lam) / np.where(ca > 0, ca, np.inf))
        a = a * min(1.0, ratio) * rng.uniform(0.0, 1.0)
        if not majorizes(lam, a):
            continue
        if np.any(prox_sorted_l1(a, lam) != 0.0):
            bad += 1
    return bad


def check_residual_majorized(n, seed=0, max_p=12):
    """``a - prox(a)`` is majorized by ``lam``."""
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(n):
        p = int(rng.integers(1, max_p + 1))
        lam, a = random_weights(rng, p), random_vector(rng, p)
        if not majorizes(lam, a - prox_sorted_l1(a, lam), atol=_tol(lam, a)):
            bad += 1
    return bad


def check_restriction(n, seed=0, max_p=12):
    """``||prox(a)_{T^c}|| <= ||prox(a_{T^c}, lam without its |T| largest)||``."""
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(n):
        p = int(rng.integers(2, max_p + 1))
        lam, a = random_weights(rng, p), random_vector(rng, p)
        m = int(rng.integers(1, p))
        T = rng.choice(p, m, replace=False)
        rest = np.setdiff1d(np.arange(p), T)
        lhs = np.linalg.norm(prox_sorted_l1(a, lam)[rest])
        rhs = np.linalg.norm(prox_sorted_l1(a[rest], lam[m:]))
        if lhs > rhs + _tol(lam, a):
            bad += 1
    return bad


def check_norm_bound(n, seed=0, max_p=12):
    """``||prox(a)|| <= ||(|a| - lam)_+||``."""
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(n):
        p = int(rng.integers(1, max_p + 1))
        lam, a = random_weights(rng, p), random_vector(rng, p)
        if not prox_norm_bound_holds(a, lam, atol=_tol(lam, a)):
            bad += 1
    return bad


def check_monotone(n, seed=0, max_p=12):
    """``0 <= y <= y'`` componentwise implies ``prox(y) <= prox(y')``."""
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(n):
        p = int(rng.integers(1, max_p + 1))
        lam = random_weights(rng, p)
        y = np.abs(random_vector(rng, p))
        y2 = y + np.abs(rng.standard_normal(p)) * (rng.random(p) < 0.5)
        if np.any(prox_sorted_l1(y, lam) > prox_sorted_l1(y2, lam) + _tol(lam, y2)):
            bad += 1
    return bad


def check_nonexpansive(n, seed=0, max_p=12):
    """``||prox(a) - prox(b)|| <= ||a - b||``."""
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(n):
        p = int(rng.integers(1, max_p + 1))
        lam, a, b = random_weights(rng, p), random_vector(rng, p), random_vector(rng, p)
        lhs = np.linalg.norm(prox_sorted_l1(a, lam) - prox_sorted_l1(b, lam))
        if lhs > np.linalg.norm(a - b) + _tol(a, b):
            bad += 1
    return bad


_CHECKS = {
    "norm_majorization": check_norm_majorization,
    "zero_prox": check_zero_prox,
    "residual_majorized": check_residual_majorized,
    "restriction": check_restriction,
    "norm_bound": check_norm_bound,
    "monotone": check_monotone,
    "nonexpansive": check_nonexpansive,
}


def run_selfcheck(n=500, seed=0):
    """Run every check; returns ``{name: failures}``."""
    out = {name: fn(n, seed) for name, fn in _CHECKS.items()}
    out["prox_oracle"] = check_prox_oracle(min(n, 300), seed, max_p=8)
    return out
