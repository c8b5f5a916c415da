"""Command-line entry point: optimize, validate, demo-sparsity, check."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .ga import OptimizationError
from .reporting import (ConfigError, cmd_demo_sparsity, cmd_optimize, cmd_validate,
                        format_demo_sparsity, format_optimize, format_validate, resolve_config,
                        write_demo_sparsity, write_optimize, write_validate)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_ACCEPTANCE = 3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI run configuration ([run], [ga], [oracle])")
    p.add_argument("--problem", help="built-in problem name or problem definition file")
    p.add_argument("--seed", type=int, help="single GA seed (overrides run.seeds)")
    p.add_argument("--out", help="directory for JSON and CSV outputs")
    p.add_argument("--parallel", type=int, help="worker threads for candidate evaluation")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qsrsopt", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="min-max optimization with sparse surrogate bounds")
    _common(p)

    p = sub.add_parser("validate", help="surrogate bounds against grid scans at one point")
    _common(p)
    p.add_argument("--point", required=True,
                   help="comma-separated design midpoint, e.g. 2.2254,1.2458,93.497,100.2317")

    p = sub.add_parser("demo-sparsity", help="quadrature coefficients of a demo function")
    p.add_argument("--target", default="quadratic", help="quadratic, cubic, t5 or zero")
    p.add_argument("--atoms", type=int, help="number of graded atoms")
    p.add_argument("--order", type=int, help="quadrature points per dimension")
    p.add_argument("--out", help="directory for the CSV output")

    p = sub.add_parser("check", help="replay the acceptance criteria")
    p.add_argument("--only", help="comma-separated criterion numbers, default all")
    p.add_argument("--seeds", type=int, default=10, help="seeds for the optimization criteria")
    p.add_argument("--out", help="directory for the JSON summary")
    return parser


def _parse_point(text: str) -> list:
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise ConfigError(f"point: cannot parse {text!r}") from None


def _run(args) -> int:
    if args.command == "demo-sparsity":
        report = cmd_demo_sparsity(args.target, args.atoms, args.order)
        print(format_demo_sparsity(report))
        if args.out:
            write_demo_sparsity(report, args.out)
        return EXIT_OK

    if args.command == "check":
        from .acceptance import run_all
        only = None if not args.only else [int(c) for c in args.only.split(",")]
        results = run_all(only, n_seeds=args.seeds)
        for r in results:
            print(r.line())
        if args.out:
            import os
            os.makedirs(args.out, exist_ok=True)
            with open(os.path.join(args.out, "acceptance.json"), "w") as fh:
                json.dump([r.to_dict() for r in results], fh, indent=1)
        return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPTANCE

    cfg = resolve_config(args.problem, args.config, args.seed, args.out, args.parallel)
    if args.command == "optimize":
        report = cmd_optimize(cfg)
        print(format_optimize(report))
        if cfg.out:
            write_optimize(report, cfg.out)
        return EXIT_OK
    report = cmd_validate(cfg, _parse_point(args.point))
    print(format_validate(report))
    if cfg.out:
        write_validate(report, cfg.out)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OptimizationError as exc:
        print(f"runtime failure: {exc} (after {exc.run.generations_run} generations, "
              f"{exc.run.evaluator_calls} evaluator calls)", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
