"""Command line entry point: ``pens run|fit|sweep-g|validate|scenarios``.

Exit codes: 0 success, 2 validation or configuration failure, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .checks import sweep_g, validate
from .config import ConfigError, builtin_description, builtin_names, resolve
from .diagnostics import fit_decay
from .experiments import RunAborted, run
from .io import read_series

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_ABORT = 3

log = logging.getLogger("pens")


def _cmd_run(args) -> int:
    try:
        cfg = resolve(args.config)
        if args.out:
            cfg = cfg.with_output_dir(args.out)
        result = run(cfg)
    except ConfigError as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_INVALID
    except RunAborted as exc:
        log.error("numerical abort: %s (partial series written)", exc)
        return EXIT_ABORT
    print(f"series:  {result.series_path}")
    print(f"summary: {result.summary_path}")
    for key, fit in result.summary["fits"].items():
        if "error" in fit:
            print(f"  {key}: fit refused ({fit['error']})")
        else:
            print(f"  {key}: exponent {fit['exponent']:+.4f} residual {fit['residual']:.2e} "
                  f"window [{fit['window'][0]:g}, {fit['window'][1]:g}] c0 {fit['c0']:.3g}")
    return EXIT_OK


def _cmd_fit(args) -> int:
    try:
        series = read_series(args.series)
        if args.column not in series:
            raise ValueError(f"column {args.column!r} not in {sorted(series)}")
        window = tuple(args.window) if args.window else None
        fit = fit_decay(series["t"], series[args.column], window, args.c0_mode, args.c0)
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    print(json.dumps(fit.as_dict(), indent=2))
    return EXIT_OK


def _cmd_sweep_g(args) -> int:
    res = sweep_g(args.n_t, args.n_lam, args.t_max)
    print(json.dumps(res, indent=2))
    ok = res["max_abs_error"] <= 1e-10 and res["max_ratio"] <= 1.0
    return EXIT_OK if ok else EXIT_INVALID


def _cmd_validate(args) -> int:
    results = validate()
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.ok for r in results) else EXIT_INVALID


def _cmd_scenarios(args) -> int:
    for name in builtin_names():
        print(f"{name:20s} {builtin_description(name)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pens", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"pens {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="run a config file or a built-in scenario")
    r.add_argument("config")
    r.add_argument("--out", help="override the output directory")
    r.set_defaults(func=_cmd_run)

    f = sub.add_parser("fit", help="fit a decay exponent to a series column")
    f.add_argument("series")
    f.add_argument("--column", required=True)
    f.add_argument("--window", nargs=2, type=float, metavar=("T_A", "T_B"))
    f.add_argument("--c0-mode", choices=("fit", "unit", "given"), default="fit")
    f.add_argument("--c0", type=float)
    f.set_defaults(func=_cmd_fit)

    g = sub.add_parser("sweep-g", help="check the damped-mode semigroup bound")
    g.add_argument("--n-t", type=int, default=200)
    g.add_argument("--n-lam", type=int, default=200)
    g.add_argument("--t-max", type=float, default=50.0)
    g.set_defaults(func=_cmd_sweep_g)

    v = sub.add_parser("validate", help="run oracle cross-checks")
    v.set_defaults(func=_cmd_validate)

    s = sub.add_parser("scenarios", help="list built-in scenarios")
    s.set_defaults(func=_cmd_scenarios)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
