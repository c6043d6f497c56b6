"""``conformal-kit`` command line.

Exit codes: 0 success, 1 configuration error or bad usage, 2 failed check.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from . import io as kit_io
from .core import ConfigurationError, ContractError, GridSpec, UnsupportedError
from .scores import score_from_name
from .sets import (
    ConformalConfig,
    cross_conformal_set,
    full_conformal_set,
    jackknife_plus_symmetric,
    jackknife_symmetric,
    shortcut_closed_form,
    shortcut_set,
)

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 1, 2
PREDICT_METHODS = ("full", "shortcut", "cross", "jackknife", "jackknife-plus", "unimodal")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="conformal-kit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("predict", help="prediction set for one query point")
    p.add_argument("data", help="headerless CSV, response in the first column")
    p.add_argument("--method", choices=PREDICT_METHODS, default="shortcut")
    p.add_argument("--score", default="out-sample:mean", help="e.g. out-sample:mean, in-sample:ridge:1.0, in-sample:knn:5")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--x", required=True, help='comma-separated features, e.g. "1.0,2.0"')
    p.add_argument("--grid", help="lower,upper,num for grid-based methods (default: prediction ± 10 sd)")
    p.add_argument("--eps", type=float, default=2.0**-10, help="tolerance of the unimodal search")
    p.add_argument("--K", type=int, default=10, help="search box [-2^K, 2^K] of the unimodal search")

    s = sub.add_parser("simulate", help="run a Monte Carlo experiment from a JSON config")
    s.add_argument("experiment", help="marginal, conditional, equivalence, finite-sample or refit")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="output prefix; writes PREFIX.json, PREFIX.csv, PREFIX.timing.json")

    c = sub.add_parser("check-lemmas", help="run the deterministic property suites")
    c.add_argument("--reps", type=int, default=1000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--suite", action="append", help="restrict to named suites (repeatable)")

    sub.add_parser("version", help="print the package version")
    return parser


def _parse_grid(text: str | None) -> GridSpec | None:
    if text is None:
        return None
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigurationError("--grid expects lower,upper,num")
    return GridSpec(float(parts[0]), float(parts[1]), int(parts[2]))


def _predict(args) -> int:
    T = kit_io.read_dataset(args.data)
    x = kit_io.parse_vector(args.x)
    if x.shape[0] != T.dimension:
        raise ConfigurationError(f"--x has {x.shape[0]} features, the dataset has {T.dimension}")
    C = score_from_name(args.score)
    grid = _parse_grid(args.grid)
    cfg = ConformalConfig(args.alpha, args.delta, grid)
    out = {"method": args.method, "score": args.score, "alpha": args.alpha, "delta": args.delta, "x": x, "n": len(T)}
    if args.method == "full":
        result, exact = full_conformal_set(C, T, x, cfg), False
    elif args.method == "cross":
        result, exact = cross_conformal_set(C, T, x, cfg), False
    elif args.method == "shortcut":
        try:
            result, exact = shortcut_closed_form(C, T, x, args.alpha, args.delta), True
        except (ContractError, UnsupportedError):
            result, exact = shortcut_set(C, T, x, cfg), False
    elif args.method in ("jackknife", "jackknife-plus"):
        if C.kind != "out_sample":
            raise ConfigurationError("Jackknife methods need an out-sample score")
        fn = jackknife_symmetric if args.method == "jackknife" else jackknife_plus_symmetric
        result, exact = fn(C.predictor, T, x, args.alpha, args.delta), True
    else:
        from .unimodal import shortcut_unimodal

        report = shortcut_unimodal(C, T, x, args.alpha, args.delta, args.eps, args.K)
        result, exact = report.interval, False
        out |= {"eps": args.eps, "K": args.K, "refits": report.refits, "refit_bound": report.bound, "branch": report.branch}
    out["exact"] = exact
    if grid is not None and not exact:
        out["grid"] = {"lower": grid.lower, "upper": grid.upper, "num": grid.num}
    out["set"] = result
    sys.stdout.write(kit_io.dumps(out))
    return EXIT_OK


def _simulate(args) -> int:
    from .harness import run_from_config

    report = run_from_config(args.experiment, kit_io.read_config(args.config), args.seed)
    if args.out:
        for path in report.write(args.out):
            print(path)
    else:
        sys.stdout.write(report.to_json())
    return EXIT_OK if report.passed else EXIT_CHECK


def _check_lemmas(args) -> int:
    from .suites import SUITES, run_all

    if args.reps < 1:
        raise ConfigurationError("--reps must be positive")
    names = args.suite or list(SUITES)
    unknown = [s for s in names if s not in SUITES]
    if unknown:
        raise ConfigurationError(f"unknown suites {unknown}; available: {list(SUITES)}")
    results = run_all(args.reps, args.seed, names)
    for res in results:
        print(res.line())
        for ex in res.examples:
            print(f"    {ex}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    if args.command == "version":
        print(__version__)
        return EXIT_OK
    handlers = {"predict": _predict, "simulate": _simulate, "check-lemmas": _check_lemmas}
    try:
        return handlers[args.command](args)
    except (ConfigurationError, ValueError, ContractError, UnsupportedError) as exc:
        print(f"conformal-kit: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
