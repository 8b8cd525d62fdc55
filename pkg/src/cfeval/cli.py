"""Command line entry point: ``cfeval {train,explain,evaluate,full,selfcheck}``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import CFEvalError, NumericalError


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="YAML/JSON run configuration")
    p.add_argument("--seed", type=int, help="override the global seed")
    p.add_argument("--out", help="override the output base directory")
    p.add_argument("--mode", choices=("discrete", "continuous"), help="counterfactual search mode")
    p.add_argument("--L", type=int, dest="L", help="explanation size")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfeval", description="Score feature-attribution explainers by counterfactual editing.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("train", "train the logistic whitebox on the 80%% split"),
        ("explain", "run the configured explainers on the test split"),
        ("evaluate", "score explanations and write the report"),
        ("full", "train, explain and evaluate in one run directory"),
    ):
        _add_run_flags(sub.add_parser(name, help=help_))
    sub.add_parser("selfcheck", help="run the acceptance checks")
    return parser


def _overrides(args) -> dict:
    return {"seed": args.seed, "out": args.out, "cf_mode": args.mode, "L": args.L}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "selfcheck":
            from .acceptance import run_all

            return 0 if run_all() else 3

        from . import pipeline

        config = pipeline.load_config(args.config, _overrides(args))
        if args.command == "train":
            summary = pipeline.cmd_train(config)
            print(json.dumps(summary, sort_keys=True, indent=2))
        elif args.command == "explain":
            for name, path in pipeline.cmd_explain(config).items():
                print(f"{name}: {path}")
        elif args.command == "evaluate":
            pipeline.cmd_evaluate(config)
            print(config.run_dir)
        else:
            print(pipeline.cmd_full(config))
        return 0
    except CFEvalError as exc:
        print(f"cfeval: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FloatingPointError as exc:
        print(f"cfeval: numerical error: {exc}", file=sys.stderr)
        return NumericalError.exit_code


if __name__ == "__main__":
    sys.exit(main())
