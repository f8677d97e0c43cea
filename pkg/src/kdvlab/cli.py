"""Command-line front end: one subcommand per experiment kind.

Usage::

    kdvlab <experiment> [--config cfg.json] [--eps E] [--n N] [--t-final T]

The configuration is a JSON document following the schema of
:func:`kdvlab.experiments.default_config`; the file overlays the defaults of
the chosen experiment, and the targeted flags override the file.  The exit
status is 0 exactly when every assertion in the emitted summary passed.
"""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import (
    EXPERIMENT_KINDS,
    ConfigError,
    ExperimentConfig,
    default_config,
    run_experiment,
)

_HELP = {
    "kdv": "evolve one limit model and check dispersion/conservation",
    "micro": "one microscopic run with chart and structure diagnostics",
    "converge": "micro-vs-limit error sweep over a decreasing eps list",
    "soliton": "solitary-wave propagation with conservation and shape checks",
    "miura": "modified-flow crosscheck and the two-component condition test",
    "hyperbolic": "zero-dispersion steepening against the characteristics time",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kdvlab",
        description="Reproducible numerical experiments for long-wave limits.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for kind in EXPERIMENT_KINDS:
        sp = sub.add_parser(kind, help=_HELP[kind])
        sp.add_argument("--config", metavar="PATH",
                        help="JSON config overlaying the experiment defaults")
        sp.add_argument("--eps", type=float,
                        help="override eps (for converge: run this single eps "
                             "against the next smaller half)")
        sp.add_argument("--n", type=int, help="override the grid size")
        sp.add_argument("--t-final", type=float, dest="t_final",
                        help="override the final time")
    return parser


def _merge(base: dict, overlay: dict) -> dict:
    for key, value in overlay.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value
    return base


def load_config(args) -> ExperimentConfig:
    cfg = default_config(args.experiment)
    if args.config:
        with open(args.config) as fh:
            cfg = _merge(cfg, json.load(fh))
    if args.eps is not None:
        if args.experiment == "converge":
            cfg["eps_list"] = [args.eps, 0.5 * args.eps]
        else:
            cfg["eps"] = args.eps
    if args.n is not None:
        cfg["grid"]["n"] = args.n
    if args.t_final is not None:
        cfg["time"]["t_final"] = args.t_final
    return ExperimentConfig.from_dict(cfg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"kdvlab: invalid configuration: {exc}", file=sys.stderr)
        return 2
    try:
        return run_experiment(cfg)
    except ConfigError as exc:
        print(f"kdvlab: invalid configuration: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
