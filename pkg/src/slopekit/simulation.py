"""Monte Carlo harness: Gaussian designs, sparse signals, replicated fits.

Every replicate draws from its own Philox streams keyed by
``(seed, replicate, purpose)``, so results do not depend on how replicates
are scheduled across threads. Gaussian variates come from numpy's
``Generator.standard_normal`` (ziggurat).
"""
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .estimators import (
    fdr_hard_threshold,
    one_step_oracle,
    sequential_fdr_soft,
    soft_threshold,
    sure_soft_threshold,
)
from .solver import SolverOptions, fit_slope, lasso_fit
from .sorted_l1 import prox_sorted_l1
from .weights import WeightSchedule, bh_weights, upper_normal_quantile

__all__ = [
    "SignalSpec",
    "ExperimentConfig",
    "TrialMetrics",
    "stream",
    "gen_design",
    "gen_signal",
    "resolvent_size",
    "resolvent_set",
    "compute_metrics",
    "run_replicate",
    "run_experiment",
    "summarize",
    "write_outputs",
]

AMPLITUDES = ("constant", "constant_bh", "separated", "block_prior")
PLACEMENTS = ("first_k", "uniform", "block")
METHODS = ("slope", "lasso", "fdr-hard", "seq-fdr", "sure")
ORTHOGONAL_ONLY = ("fdr-hard", "seq-fdr", "sure")

# stream purposes within a replicate
_DESIGN, _SIGNAL, _NOISE = 0, 1, 2


def stream(seed, *key):
    """Independent Philox generator for ``(seed, *key)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return stream(seed)


@dataclass(frozen=True)
class SignalSpec:
    """Ground-truth generator.

    ``amplitude`` selects the nonzero magnitude:

    * ``constant``: ``multiplier * sqrt(2 log p)``
    * ``constant_bh``: ``multiplier * Phi^{-1}(1 - q / (2p))``
    * ``separated``: the ``j``-th placed nonzero gets
      ``multiplier * sqrt(2 log p) * (k - j + 1)``, so gaps dwarf the noise
    * ``block_prior``: ``tau``, one nonzero per block (forces ``block``)

    ``placement`` is ``first_k``, ``uniform`` (random k-subset) or ``block``
    (one uniform index in each of ``k`` consecutive blocks of size
    ``p // k``; any remainder columns stay null).
    """

    k: int
    amplitude: str = "constant"
    multiplier: float = 10.0
    placement: str = "uniform"
    q: float = 0.1
    tau: float = 1.0

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be nonnegative")
        if self.amplitude not in AMPLITUDES:
            raise ValueError(f"unknown amplitude rule {self.amplitude!r}")
        if self.placement not in PLACEMENTS:
            raise ValueError(f"unknown placement {self.placement!r}")


def gen_design(n, p, seed):
    """``n x p`` matrix with i.i.d. ``N(0, 1/n)`` entries."""
    if n < 1 or p < 1:
        raise ValueError("n and p must be positive")
    return _rng(seed).standard_normal((n, p)) / math.sqrt(n)


def _amplitudes(spec, p):
    k = spec.k
    if spec.amplitude == "constant":
        return np.full(k, spec.multiplier * math.sqrt(2.0 * math.log(p)))
    if spec.amplitude == "constant_bh":
        return np.full(k, spec.multiplier * upper_normal_quantile(spec.q / (2.0 * p)))
    if spec.amplitude == "separated":
        steps = np.arange(k, 0, -1, dtype=float)
        return spec.multiplier * math.sqrt(2.0 * math.log(p)) * steps
    return np.full(k, float(spec.tau))


def gen_signal(spec, p, seed):
    """Coefficient vector with exactly ``spec.k`` nonzeros."""
    k = spec.k
    if k > p:
        raise ValueError(f"k={k} exceeds p={p}")
    beta = np.zeros(p)
    if k == 0:
        return beta
    rng = _rng(seed)
    placement = "block" if spec.amplitude == "block_prior" else spec.placement
    if placement == "first_k":
        idx = np.arange(k)
    elif placement == "uniform":
        idx = rng.choice(p, size=k, replace=False)
    else:
        width = p // k
        idx = np.arange(k) * width + rng.integers(0, width, size=k)
    beta[idx] = _amplitudes(spec, p)
    return beta


def resolvent_size(n, p, k, q):
    """``K = max(ceil(2k/(1-q)), k + min(floor(sqrt(kn/log p)), floor(sqrt p)))``, capped at ``p - 1``."""
    d = min(math.floor(math.sqrt(k * n / math.log(p))), math.isqrt(p)) if p > 1 else 0
    K = max(math.ceil(2 * k / (1 - q)), k + d)
    return min(K, p - 1)


def resolvent_set(X, z, S, K):
    """``S`` plus the ``K - |S|`` off-``S`` indices with largest ``|X_i'z|``.

    ``X=None`` stands for the identity design. Ties keep index order.
    """
    z = np.asarray(z, dtype=float)
    corr = np.abs(z if X is None else np.asarray(X, dtype=float).T @ z)
    p = corr.shape[0]
    S = np.unique(np.asarray(S, dtype=int))
    if not (S.size <= K < p):
        raise ValueError(f"need |S| <= K < p, got |S|={S.size}, K={K}, p={p}")
    off = np.setdiff1d(np.arange(p), S)
    top = off[np.argsort(-corr[off], kind="stable")[: K - S.size]]
    return np.sort(np.concatenate((S, top)))


@dataclass
class TrialMetrics:
    mse: float
    pred_err: float
    V: int
    R: int
    fdp: float
    tpp: float
    mse_ratio: float
    v_bound_ok: bool
    support_in_resolvent: bool = None


def compute_metrics(beta, beta_hat, X, sigma, q, k, support_tol=None,
                    resolvent=None, beta_tilde=None):
    """Loss and selection metrics for one fit.

    ``X=None`` means the identity design. A coordinate counts as selected
    when ``|beta_hat_i| > support_tol``; the default tolerance is
    ``1e-10 * sigma * lambda^BH_1(q)``. ``support_in_resolvent`` is filled
    only when ``resolvent`` is given, and then also covers ``beta_tilde``.
    """
    beta = np.asarray(beta, dtype=float)
    beta_hat = np.asarray(beta_hat, dtype=float)
    p = beta.shape[0]
    if beta_hat.shape != beta.shape:
        raise ValueError("beta and beta_hat differ in shape")
    if support_tol is None:
        support_tol = 1e-10 * sigma * bh_weights(q, p)[0]
    diff = beta_hat - beta
    mse = float(diff @ diff)
    if X is None:
        pred = mse
    else:
        Xd = np.asarray(X, dtype=float) @ diff
        pred = float(Xd @ Xd)
    selected = np.abs(beta_hat) > support_tol
    truth = beta != 0
    R = int(selected.sum())
    V = int((selected & ~truth).sum())
    true_disc = R - V
    ratio = mse / (2 * sigma**2 * k * math.log(p / k)) if 0 < k < p else float("nan")
    contained = None
    if resolvent is not None:
        inside = np.zeros(p, dtype=bool)
        inside[np.asarray(resolvent, dtype=int)] = True
        union = truth | selected
        if beta_tilde is not None:
            union |= np.abs(np.asarray(beta_tilde)) > support_tol
        contained = bool(np.all(inside[union]))
    return TrialMetrics(
        mse=mse,
        pred_err=pred,
        V=V,
        R=R,
        fdp=V / max(R, 1),
        tpp=true_disc / max(k, 1),
        mse_ratio=ratio,
        v_bound_ok=V <= q / (1 - q) * k,
        support_in_resolvent=contained,
    )


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    p: int
    k: int
    sigma: float = 1.0
    design: str = "gaussian"
    q: float = 0.1
    weight_kind: str = "bh"
    epsilon: float = 0.0
    replicates: int = 1
    seed: int = 0
    methods: tuple = ("slope",)
    amplitude: str = "constant"
    multiplier: float = 10.0
    placement: str = "uniform"
    tau: float = 1.0
    # defaults to lambda_1 of the SLOPE weights
    lasso_lambda: float = None
    tol: float = 1e-8
    max_iter: int = 20000
    hist_bins: int = 20

    def __post_init__(self):
        if self.design not in ("gaussian", "identity"):
            raise ValueError(f"design must be 'gaussian' or 'identity', got {self.design!r}")
        if self.design == "identity" and self.n != self.p:
            raise ValueError("identity design needs n == p")
        if self.n < 1 or self.p < 1:
            raise ValueError("n and p must be positive")
        if not (0 <= self.k <= self.p):
            raise ValueError("k must lie in 0..p")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if not (self.sigma > 0):
            raise ValueError("sigma must be positive")
        if not (0 < self.q < 1):
            raise ValueError("q must lie in (0, 1)")
        if not self.methods:
            raise ValueError("methods must be non-empty")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}; choose from {METHODS}")
            if m in ORTHOGONAL_ONLY and self.design != "identity":
                raise ValueError(f"method {m!r} needs the identity design")
        if self.lasso_lambda is not None and not self.lasso_lambda > 0:
            raise ValueError("lasso_lambda must be positive")
        self.signal_spec()
        self.schedule()

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        d = dict(d)
        if "methods" in d:
            d["methods"] = tuple(d["methods"])
        if d.get("design") == "identity" and "n" not in d and "p" in d:
            d["n"] = d["p"]
        try:
            return cls(**d)
        except TypeError as exc:
            raise ValueError(str(exc)) from None

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        d = asdict(self)
        d["methods"] = list(self.methods)
        return d

    def signal_spec(self):
        return SignalSpec(k=self.k, amplitude=self.amplitude, multiplier=self.multiplier,
                          placement=self.placement, q=self.q, tau=self.tau)

    def schedule(self):
        return WeightSchedule(self.weight_kind, self.p, self.sigma, self.q, self.epsilon)


def _fit_method(method, cfg, X, y, lam, opts):
    # returns (beta_hat, converged, iterations)
    identity = X is None
    if method == "slope":
        if identity:
            return prox_sorted_l1(y, lam), True, 0
        fit = fit_slope(X, y, lam, opts)
        return fit.beta_hat, fit.converged, fit.iterations
    if method == "lasso":
        lam1 = cfg.lasso_lambda if cfg.lasso_lambda is not None else float(lam[0])
        if identity:
            return soft_threshold(y, lam1), True, 0
        fit = lasso_fit(X, y, lam1, opts)
        return fit.beta_hat, fit.converged, fit.iterations
    if method == "fdr-hard":
        return fdr_hard_threshold(y, cfg.q, cfg.sigma).beta_hat, True, 0
    if method == "seq-fdr":
        return sequential_fdr_soft(y, cfg.q, cfg.sigma), True, 0
    return sure_soft_threshold(y, cfg.sigma).beta_hat, True, 0


def run_replicate(cfg, rep):
    """Simulate one replicate and return one row dict per method."""
    identity = cfg.design == "identity"
    X = None if identity else gen_design(cfg.n, cfg.p, stream(cfg.seed, rep, _DESIGN))
    beta = gen_signal(cfg.signal_spec(), cfg.p, stream(cfg.seed, rep, _SIGNAL))
    z = cfg.sigma * stream(cfg.seed, rep, _NOISE).standard_normal(cfg.n)
    y = beta + z if identity else X @ beta + z
    lam = cfg.schedule().materialize()
    opts = SolverOptions(max_iter=cfg.max_iter, tol=cfg.tol)

    if identity:
        beta_tilde = prox_sorted_l1(beta + z, lam)
    else:
        beta_tilde = one_step_oracle(X, z, beta, lam)
    K = resolvent_size(cfg.n, cfg.p, cfg.k, cfg.q)
    S = np.flatnonzero(beta)
    s_star = resolvent_set(X, z, S, K) if S.size <= K else None

    rows = []
    for method in cfg.methods:
        beta_hat, converged, iters = _fit_method(method, cfg, X, y, lam, opts)
        m = compute_metrics(beta, beta_hat, X, cfg.sigma, cfg.q, cfg.k,
                            resolvent=s_star, beta_tilde=beta_tilde)
        row = {"replicate": rep, "method": method}
        row.update(asdict(m))
        row["converged"] = converged
        row["iterations"] = iters
        rows.append(row)
    return rows


def run_experiment(cfg, threads=1):
    """Run all replicates; returns ``(rows, summary)``.

    Replicates are distributed over ``threads`` workers with BLAS pinned to
    one thread, and rows come back in replicate order.
    """
    if threads < 1:
        raise ValueError("threads must be at least 1")
    with threadpool_limits(limits=1):
        if threads == 1:
            chunks = [run_replicate(cfg, r) for r in range(cfg.replicates)]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                chunks = list(pool.map(lambda r: run_replicate(cfg, r), range(cfg.replicates)))
    rows = [row for chunk in chunks for row in chunk]
    return rows, summarize(rows, cfg)


_NUMERIC = ("mse", "pred_err", "V", "R", "fdp", "tpp", "mse_ratio")
_QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


def summarize(rows, cfg):
    out = {"config": cfg.to_dict(), "methods": {}}
    for method in cfg.methods:
        sel = [r for r in rows if r["method"] == method]
        stats = {"replicates": len(sel)}
        for key in _NUMERIC:
            v = np.array([r[key] for r in sel], dtype=float)
            if np.all(np.isnan(v)):
                continue
            se = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else float("nan")
            stats[key] = {
                "mean": float(np.mean(v)),
                "se": se,
                "quantiles": {str(qq): float(np.quantile(v, qq)) for qq in _QUANTILES},
            }
        stats["frac_v_bound_ok"] = float(np.mean([r["v_bound_ok"] for r in sel]))
        cont = [r["support_in_resolvent"] for r in sel if r["support_in_resolvent"] is not None]
        stats["frac_support_in_resolvent"] = float(np.mean(cont)) if cont else None
        stats["non_converged"] = int(sum(not r["converged"] for r in sel))
        out["methods"][method] = stats
    first = out["methods"][cfg.methods[0]]
    out["mean_fdp"] = first["fdp"]["mean"]
    out["mean_V"] = first["V"]["mean"]
    return out


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_trials_csv(rows, path):
    cols = list(rows[0])
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(r[c]) for c in cols) + "\n")


def _write_hist(path, edges, counts, label):
    with open(path, "w") as fh:
        fh.write(f"# {label}: bin_left bin_right count\n")
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            fh.write(f"{lo:.6g} {hi:.6g} {int(c)}\n")


def write_outputs(rows, summary, cfg, out_dir, hist=True):
    """Write ``trials.csv``, ``summary.json`` and optional histogram tables."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_trials_csv(rows, out / "trials.csv")
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
    if hist:
        sel = [r for r in rows if r["method"] == cfg.methods[0]]
        fdp = np.array([r["fdp"] for r in sel])
        counts, edges = np.histogram(fdp, bins=cfg.hist_bins, range=(0.0, 1.0))
        _write_hist(out / "hist_fdp.dat", edges, counts, f"FDP ({cfg.methods[0]})")
        V = np.array([r["V"] for r in sel])
        edges = np.arange(-0.5, V.max() + 1.5)
        counts, _ = np.histogram(V, bins=edges)
        _write_hist(out / "hist_v.dat", edges, counts, f"V ({cfg.methods[0]})")
