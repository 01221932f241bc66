"""Command-line entry point.

Exit codes: 0 success, 2 usage or input error, 3 failed invariant.
"""
import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import estimators
from .checks import run_selfcheck
from .simulation import ExperimentConfig, run_experiment, write_outputs
from .solver import SolverOptions, fit_slope, lasso_fit
from .sorted_l1 import as_weights, prox_sorted_l1
from .weights import WeightSchedule

EXIT_USAGE = 2
EXIT_INVARIANT = 3


class InputError(Exception):
    pass


def read_csv(path, header=False):
    """Parse a headerless numeric CSV into a 2-D array.

    Blank lines are skipped. Errors name the offending line.
    """
    rows = []
    try:
        fh = open(path)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if header and lineno == 1:
                continue
            line = line.strip()
            if not line:
                continue
            try:
                row = [float(tok) for tok in line.split(",")]
            except ValueError:
                raise InputError(f"{path}: line {lineno}: cannot parse {line!r}") from None
            if rows and len(row) != len(rows[0]):
                raise InputError(
                    f"{path}: line {lineno}: expected {len(rows[0])} fields, got {len(row)}")
            rows.append(row)
    if not rows:
        raise InputError(f"{path}: no data")
    return np.array(rows)


def read_vector(path, header=False):
    a = read_csv(path, header)
    if a.shape[1] == 1 or a.shape[0] == 1:
        return a.ravel()
    raise InputError(f"{path}: expected a single row or column, got shape {a.shape}")


def read_weights(path, header=False):
    """Weights from a one-column file or the ``index,lambda`` layout."""
    a = read_csv(path, header)
    if a.shape[1] == 2:
        return a[:, 1]
    if a.shape[1] == 1 or a.shape[0] == 1:
        return a.ravel()
    raise InputError(f"{path}: expected one column or index,lambda pairs")


def _fmt(x):
    return "%.17g" % x


def write_vector(v, out, header=None):
    lines = [header] if header else []
    lines += [_fmt(x) for x in v]
    _emit("\n".join(lines) + "\n", out)


def _emit(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _probability(flag):
    def parse(s):
        try:
            v = float(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} must be a number, got {s!r}") from None
        if not 0.0 < v < 1.0:
            raise argparse.ArgumentTypeError(f"{flag} must lie in (0, 1), got {s}")
        return v
    return parse


def _positive(flag, kind=float):
    def parse(s):
        try:
            v = kind(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} must be a {kind.__name__}, got {s!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"{flag} must be positive, got {s}")
        return v
    return parse


def _nonnegative(flag):
    def parse(s):
        try:
            v = float(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} must be a number, got {s!r}") from None
        if not v >= 0:
            raise argparse.ArgumentTypeError(f"{flag} must be nonnegative, got {s}")
        return v
    return parse


def _add_schedule_flags(sp, need_p=False):
    sp.add_argument("--q", type=_probability("--q"), default=0.1)
    if need_p:
        sp.add_argument("--p", type=_positive("--p", int), required=True)
    sp.add_argument("--sigma", type=_positive("--sigma"), default=1.0)
    sp.add_argument("--kind", choices=("bh", "sqrtlog"), default="bh")
    sp.add_argument("--epsilon", type=_nonnegative("--epsilon"), default=0.0)


def _schedule(args, p):
    return WeightSchedule(args.kind, p, args.sigma, args.q, args.epsilon).materialize()


def cmd_weights(args):
    lam = _schedule(args, args.p)
    lines = ["index,lambda"] if args.header else []
    lines += [f"{i},{_fmt(v)}" for i, v in enumerate(lam, start=1)]
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _load_weights(args, p):
    if args.weights:
        lam = read_weights(args.weights, args.header)
        if lam.shape[0] != p:
            raise InputError(f"{args.weights}: expected {p} weights, got {lam.shape[0]}")
    else:
        lam = _schedule(args, p)
    try:
        return as_weights(lam)
    except ValueError as exc:
        raise InputError(f"weights: {exc}") from None


def cmd_prox(args):
    y = read_vector(args.y, args.header)
    lam = _load_weights(args, y.shape[0])
    try:
        x = prox_sorted_l1(y, lam, method=args.method, debug=args.debug)
    except AssertionError as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    write_vector(x, args.out)
    return 0


def _is_orthogonal(X):
    G = X.T @ X
    return X.shape[0] >= X.shape[1] and np.max(np.abs(G - np.eye(X.shape[1]))) <= 1e-8


def cmd_fit(args):
    X = read_csv(args.x, args.header)
    y = read_vector(args.y, args.header)
    if y.shape[0] != X.shape[0]:
        raise InputError(f"y has {y.shape[0]} entries but X has {X.shape[0]} rows")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise InputError("X and y must be finite")
    p = X.shape[1]
    opts = SolverOptions(max_iter=args.max_iter, tol=args.tol)
    info = {"method": args.method}
    if args.method in ("slope", "lasso"):
        lam = _load_weights(args, p)
        if args.method == "slope":
            fit = fit_slope(X, y, lam, opts)
        else:
            fit = lasso_fit(X, y, args.lam if args.lam is not None else float(lam[0]), opts)
        beta = fit.beta_hat
        info.update(duality_gap=fit.duality_gap, relative_gap=fit.relative_gap,
                    iterations=fit.iterations, objective=fit.objective,
                    converged=fit.converged, kkt_majorization_ok=fit.kkt_majorization_ok)
    else:
        if not _is_orthogonal(X):
            raise InputError(f"method {args.method} needs an orthogonal design (X'X = I)")
        xty = X.T @ y
        if args.method == "fdr-hard":
            res = estimators.fdr_hard_threshold(xty, args.q, args.sigma)
            beta = res.beta_hat
            info.update(threshold=res.threshold if np.isfinite(res.threshold) else None,
                        rejections=res.rejections)
        elif args.method == "seq-fdr":
            beta = estimators.sequential_fdr_soft(xty, args.q, args.sigma)
        else:
            res = estimators.sure_soft_threshold(xty, args.sigma)
            beta = res.beta_hat
            info.update(threshold=res.lambda_hat)
        info.update(duality_gap=None, iterations=0, objective=None, converged=True)
    info["support_size"] = int(np.count_nonzero(beta))
    write_vector(beta, args.out)
    sidecar = Path(args.out).with_suffix(".json")
    sidecar.write_text(json.dumps(info, indent=2) + "\n")
    return 0


def cmd_simulate(args):
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise InputError(f"{args.config}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{args.config}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise InputError(f"{args.config}: top level must be an object")
    if args.seed is not None:
        raw["seed"] = args.seed
    try:
        cfg = ExperimentConfig.from_dict(raw)
    except ValueError as exc:
        raise InputError(f"{args.config}: {exc}") from None
    rows, summary = run_experiment(cfg, threads=args.threads)
    write_outputs(rows, summary, cfg, args.out_dir, hist=not args.no_hist)
    return 0


def cmd_selfcheck(args):
    results = run_selfcheck(args.instances, args.seed)
    failed = 0
    for name, bad in results.items():
        print(f"{'PASS' if bad == 0 else 'FAIL'} {name} ({bad} failures)")
        failed += bad
    return EXIT_INVARIANT if failed else 0


def build_parser():
    parser = argparse.ArgumentParser(prog="slopekit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("weights", help="print a weight schedule as CSV")
    _add_schedule_flags(sp, need_p=True)
    sp.add_argument("--header", action="store_true", help="write an index,lambda header")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_weights)

    sp = sub.add_parser("prox", help="evaluate the sorted L1 prox")
    sp.add_argument("--y", required=True)
    sp.add_argument("--weights", default=None, help="CSV of weights; overrides --q/--kind")
    _add_schedule_flags(sp)
    sp.add_argument("--method", choices=("stack", "pava"), default="stack")
    sp.add_argument("--debug", action="store_true", help="cross-check stack against PAVA")
    sp.add_argument("--header", action="store_true", help="skip one header line in inputs")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_prox)

    sp = sub.add_parser("fit", help="fit an estimator to X, y")
    sp.add_argument("--x", required=True)
    sp.add_argument("--y", required=True)
    sp.add_argument("--method", choices=("slope", "lasso", "fdr-hard", "seq-fdr", "sure"),
                    default="slope")
    sp.add_argument("--weights", default=None)
    _add_schedule_flags(sp)
    sp.add_argument("--lambda", dest="lam", type=_positive("--lambda"), default=None,
                    help="lasso penalty; defaults to the first weight")
    sp.add_argument("--tol", type=_positive("--tol"), default=1e-8)
    sp.add_argument("--max-iter", type=_positive("--max-iter", int), default=20000)
    sp.add_argument("--header", action="store_true", help="skip one header line in inputs")
    sp.add_argument("--out", default="beta_hat.csv")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("simulate", help="run a Monte Carlo experiment from a JSON config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--seed", type=int, default=None, help="override the config seed")
    sp.add_argument("--threads", type=_positive("--threads", int), default=1)
    sp.add_argument("--no-hist", action="store_true", help="skip hist_fdp.dat / hist_v.dat")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("selfcheck", help="run the randomized property suite")
    sp.add_argument("--instances", type=_positive("--instances", int), default=500)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_selfcheck)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"slopekit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"slopekit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
