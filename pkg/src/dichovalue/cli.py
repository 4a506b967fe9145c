"""Command-line entry point: ``dichovalue {value,select,simulate}``.

Exit status is 0 on success, 2 for bad flags, 3 for unreadable or invalid
data and 4 for numeric failures.  Every run prints its resolved seed on
stderr so the run can be replayed with ``--seed``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import secrets
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from .exact import UndefinedBiasRatio, unbiased_shapley_exact, value_report
from .game import MAX_EXACT_PLAYERS, EvaluationError, TooManyPlayersError
from .priors import Prior, parse_prior
from .regression import DataLoadError, load_csv, performance_game
from .sampling import SamplerConfig, estimate, sample_orderings, sampled_report, weights_for
from .selection import (
    select_bn_fixed_point,
    select_forward_by_value,
    stepwise_pvalue,
    subset_search_ic,
)
from .simulation import BENCHMARK_METHODS, SimConfig, run_benchmark, stats_to_csv, stats_to_json

log = logging.getLogger("dichovalue")

EXIT_FLAGS = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

WORKERS_ENV = "DICHOVALUE_WORKERS"
# exact evaluation is the default up to this many regressors
AUTO_EXACT_LIMIT = 16
DEFAULT_ORDERINGS = 1000

# method -> (default prior, report field holding the value)
VALUE_METHODS = {
    "shapley": ("sv:0", "psi"),
    "banzhaf": ("bv:0", "psi"),
    "dvalue": ("sv:0", "psi"),
    "unbiased-dvalue": ("sv:0", "psi_unbiased"),
    "unbiased-shapley": ("sv:0", None),
    "gamma": ("sv:0", "gamma"),
    "lambda": ("sv:0", "lambda_"),
    "beta-bn": ("betabn:1,1", "psi"),
}
FIXED_PRIOR = ("shapley", "banzhaf", "unbiased-shapley")

SELECT_METHODS = {
    "shapley": "shapley",
    "unbiased-shapley": "unbiased_shapley",
    "gamma": "gamma_sv0",
    "lambda": "lambda_sv0",
    "dvalue-bn": "dvalue_bn",
    "unbiased-dvalue-bn": "unbiased_dvalue_bn",
    "aic": "aic",
    "bic": "bic",
    "hq": "hq",
    "stepwise": "stepwise",
}


class UsageError(ValueError):
    """Flag combination that argparse cannot reject on its own."""


def _default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", WORKERS_ENV, env)
    return os.cpu_count() or 1


def _positive_int(text: str) -> int:
    k = int(text)
    if k < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return k


def _seed(text: str) -> int:
    s = int(text)
    if not 0 <= s < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2**64)")
    return s


def _resolve_seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbits(63)
    print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _g(x) -> str:
    return "-" if x is None or (isinstance(x, float) and np.isnan(x)) else f"{x:.6g}"


def _table(header: list[str], rows: list[list]) -> str:
    cells = [header] + [[c if isinstance(c, str) else _g(c) for c in r] for r in rows]
    widths = [max(len(r[k]) for r in cells) for k in range(len(header))]
    lines = ["  ".join(c.rjust(w) if k else c.ljust(w) for k, (c, w) in enumerate(zip(r, widths))) for r in cells]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- value


def _cmd_value(args) -> int:
    seed = _resolve_seed(args)
    data = load_csv(args.data, args.target)
    n = data.n
    default_prior, field = VALUE_METHODS[args.method]
    if args.prior and args.method in FIXED_PRIOR:
        raise UsageError(f"--prior does not apply to --method {args.method}")
    prior = parse_prior(args.prior or default_prior, n, Path(args.data).parent)
    if args.method == "beta-bn" and prior.kind != "betabn":
        raise UsageError("--method beta-bn needs a betabn:<theta>,<rho> prior")

    exact = args.exact or (args.orderings is None and n <= AUTO_EXACT_LIMIT)
    if exact and n > MAX_EXACT_PLAYERS:
        raise UsageError(f"exact evaluation supports at most {MAX_EXACT_PLAYERS} regressors, data has {n}")
    game = performance_game(data)
    names = list(data.names)
    if exact:
        report = value_report(game, prior, "exact", names)
        stderr = None
        if field is None:
            values = unbiased_shapley_exact(game)
    else:
        cfg = SamplerConfig(orderings=args.orderings or DEFAULT_ORDERINGS, seed=seed, workers=args.workers)
        report = sampled_report(game, prior, cfg, names)
        if field is None:
            sample = sample_orderings(game, cfg, names)
            est = estimate(sample, weights_for("unbiased_shapley", n))
            values, stderr = est.mean, est.stderr
        else:
            stderr = report.stderr.get(field.rstrip("_"))
    if field is not None:
        values = getattr(report, field)
        if values is None:
            raise UndefinedBiasRatio("bias ratio is undefined: the D-values sum to zero")
    report.method = args.method
    total = float(np.sum(values))
    span = game.evaluate(game.grand) - game.evaluate(0)

    order = sorted(range(n), key=lambda i: (-values[i], names[i]))
    if args.out == "json":
        doc = {
            "seed": seed,
            "method": args.method,
            "exact": bool(exact),
            "value": [float(v) for v in values],
            "value_stderr": None if stderr is None else [float(s) for s in stderr],
            "order": [names[i] for i in order],
            "sum_of_values": total,
            "grand_minus_empty": span,
            "report": report.to_dict(),
        }
        _emit(json.dumps(doc, indent=2) + "\n", args.output)
        return 0
    cols = [("value", values), ("gamma", report.gamma), ("lambda", report.lambda_), ("kappa", report.kappa)]
    if report.psi_unbiased is not None:
        cols.append(("psi_unbiased", report.psi_unbiased))
    if stderr is not None:
        cols.append(("stderr", stderr))
    if args.out == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", *(c for c, _ in cols)])
        for i in order:
            w.writerow([names[i], *(repr(float(a[i])) for _, a in cols)])
        _emit(buf.getvalue(), args.output)
        return 0
    text = _table(["name", *(c for c, _ in cols)], [[names[i], *(float(a[i]) for _, a in cols)] for i in order])
    text += f"\nmethod {args.method}, prior {report.prior}, {'exact' if exact else f'{args.orderings or DEFAULT_ORDERINGS} orderings'}\n"
    text += f"bias ratio alpha: {_g(report.alpha)}\n"
    text += f"sum of values: {_g(total)}   v(N) - v(empty): {_g(span)}   gap: {_g(total - span)}\n"
    _emit(text, args.output)
    return 0


# ---------------------------------------------------------------- select


def _cmd_select(args) -> int:
    seed = _resolve_seed(args)
    data = load_csv(args.data, args.target)
    method = SELECT_METHODS[args.method]
    cfg = SamplerConfig(orderings=args.orderings, seed=seed, workers=args.workers)
    if method in ("aic", "bic", "hq"):
        res = subset_search_ic(data, method)
    elif method == "stepwise":
        res = stepwise_pvalue(data, args.alpha, args.alpha_out)
    elif method.endswith("_bn"):
        res = select_bn_fixed_point(data, method.startswith("unbiased"), args.alpha, cfg, args.eta0, args.max_iter)
    else:
        res = select_forward_by_value(data, method, args.alpha, cfg)
    if args.out == "json":
        doc = res.to_dict()
        doc["seed"] = seed
        _emit(json.dumps(doc, indent=2) + "\n", args.output)
        return 0
    if args.out == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "action", "name", "score", "p_value", "admitted"])
        for s in res.trace:
            w.writerow([s.step, s.action, s.name, repr(s.score), repr(s.p_value), int(s.admitted)])
        _emit(buf.getvalue(), args.output)
        return 0
    text = f"selected ({res.selected.size()}): {', '.join(res.selected_names) or '(none)'}\n"
    if res.trace:
        text += "\n" + _table(
            ["step", "action", "name", "score", "p_value", "admitted"],
            [[str(s.step), s.action, s.name, s.score, s.p_value, "yes" if s.admitted else "no"] for s in res.trace],
        )
    if res.eta_path:
        text += "\neta path: " + " -> ".join(_g(e) for e in res.eta_path)
        text += f" ({'converged' if res.converged else 'not converged'})\n"
    for d in res.diagnostics:
        text += f"note: {d}\n"
    _emit(text, args.output)
    return 0


# ---------------------------------------------------------------- simulate


def _cmd_simulate(args) -> int:
    seed = _resolve_seed(args)
    methods = tuple(m.strip().replace("-", "_") for m in args.methods.split(",") if m.strip())
    cfg = SimConfig(
        models=args.models,
        m=args.m,
        n=args.n,
        true_size=args.true_size,
        correlated=args.correlated,
        seed=seed,
        methods=methods,
        alpha_sig=args.alpha,
        orderings=args.orderings,
        noise_sd=args.noise_sd,
        coef_sd=args.coef_sd,
        eta0=args.eta0,
        bn_max_iter=args.bn_max_iter,
        workers=args.workers,
    )
    stats = run_benchmark(cfg)
    fmt = args.out
    if fmt is None:
        fmt = "json" if args.output and args.output.endswith(".json") else "csv"
    text = stats_to_json(stats, cfg) + "\n" if fmt == "json" else stats_to_csv(stats)
    _emit(text, args.output)
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dichovalue", description="Valuation of regressors and variable selection.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_choices):
        sp.add_argument("--seed", type=_seed, help="random seed; a fresh one is drawn and printed if omitted")
        sp.add_argument("--workers", type=_positive_int, default=_default_workers(),
                        help=f"parallel workers (default: ${WORKERS_ENV} or the CPU count)")
        sp.add_argument("--out", choices=out_choices, help="output format")
        sp.add_argument("--output", help="write to this file instead of stdout")

    v = sub.add_parser("value", help="value every regressor of a dataset")
    v.add_argument("--data", required=True, help="CSV file with a header row")
    v.add_argument("--target", required=True, help="response column")
    v.add_argument("--method", required=True, choices=list(VALUE_METHODS))
    v.add_argument("--prior", help="sv:<eta>, bv:<eta>, bn:<eta>, betabn:<theta>,<rho> or custom:<file>")
    g = v.add_mutually_exclusive_group()
    g.add_argument("--exact", action="store_true", help="enumerate all coalitions")
    g.add_argument("--orderings", type=_positive_int, help="estimate from this many random orderings")
    common(v, ["table", "json", "csv"])
    v.set_defaults(func=_cmd_value)

    s = sub.add_parser("select", help="select regressors")
    s.add_argument("--data", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--method", required=True, choices=list(SELECT_METHODS))
    s.add_argument("--alpha", type=float, default=0.05, help="significance level for admission")
    s.add_argument("--alpha-out", type=float, default=0.10, help="stepwise removal level")
    s.add_argument("--orderings", type=_positive_int, default=100)
    s.add_argument("--eta0", type=float, default=0.5, help="starting eta for the BN methods")
    s.add_argument("--max-iter", type=_positive_int, default=20)
    common(s, ["table", "json", "csv"])
    s.set_defaults(func=_cmd_select)

    defaults = {f.name: f.default for f in fields(SimConfig)}
    m = sub.add_parser("simulate", help="run the synthetic selection benchmark")
    m.add_argument("--models", type=_positive_int, default=defaults["models"])
    m.add_argument("--m", type=_positive_int, default=defaults["m"], help="observations per model")
    m.add_argument("--n", type=_positive_int, default=defaults["n"], help="candidate regressors")
    m.add_argument("--true-size", type=_positive_int, default=defaults["true_size"])
    m.add_argument("--correlated", action="store_true")
    m.add_argument("--methods", default=",".join(defaults["methods"]),
                   help=f"comma-separated subset of {','.join(BENCHMARK_METHODS)}")
    m.add_argument("--alpha", type=float, default=defaults["alpha_sig"])
    m.add_argument("--orderings", type=_positive_int, default=defaults["orderings"])
    m.add_argument("--noise-sd", type=float, default=defaults["noise_sd"])
    m.add_argument("--coef-sd", type=float, default=defaults["coef_sd"])
    m.add_argument("--eta0", type=float, default=defaults["eta0"])
    m.add_argument("--bn-max-iter", type=_positive_int, default=defaults["bn_max_iter"])
    common(m, ["csv", "json"])
    m.set_defaults(func=_cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (DataLoadError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (EvaluationError, UndefinedBiasRatio, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, TooManyPlayersError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FLAGS


if __name__ == "__main__":
    sys.exit(main())
