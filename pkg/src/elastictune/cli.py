"""Command-line entry points.

Subcommands mirror the experiment kinds: `finetune`, `search`, and
`cost` run those pipelines, `ablate` runs one of the ablation kinds,
and `export` regenerates plot CSVs from a saved bundle.  Every run
takes either --config (a YAML experiment file) or --preset (a named
space with default settings); --seed rebases all run seeds and --out
overrides the output directory (default root comes from the
ELASTICTUNE_OUT_ROOT environment variable, falling back to ./runs).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import cost as cost_model
from .experiment import (ConfigError, ExperimentConfig, StageError,
                         emit_plot_data, load_bundle, run_experiment)
from .model import maximal_config
from .space import PRESETS

ABLATION_KINDS = ("ablation-teacher", "ablation-space", "ablation-epochs")


def _add_run_flags(parser):
    parser.add_argument("--config", help="experiment YAML file")
    parser.add_argument("--preset", choices=sorted(PRESETS),
                        help="named space with default settings")
    parser.add_argument("--seed", type=int,
                        help="rebase every run seed on this value")
    parser.add_argument("--out", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="elastictune",
        description="Elastic weight-sharing fine-tuning and sub-network "
                    "search workbench.")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, text in (("finetune", "warm-up plus elastic fine-tuning"),
                       ("search", "full pipeline ending in a Pareto search"),
                       ("cost", "MACs/parameter breakdown of a preset")):
        p = sub.add_parser(name, help=text)
        _add_run_flags(p)

    p = sub.add_parser("ablate", help="teacher / space / epochs studies")
    _add_run_flags(p)
    p.add_argument("--kind", choices=ABLATION_KINDS,
                   help="required with --preset; --config carries its own kind")

    p = sub.add_parser("export", help="regenerate plot CSVs from a bundle")
    p.add_argument("--bundle", required=True, help="bundle directory")
    p.add_argument("--out", help="write CSVs somewhere else")
    return parser


def _resolve_config(args, kind) -> ExperimentConfig:
    if bool(args.config) == bool(args.preset):
        raise ConfigError("exactly one of --config and --preset is required")
    if args.config:
        config = ExperimentConfig.load(args.config)
        if kind == "ablate":
            if config.kind not in ABLATION_KINDS:
                raise ConfigError(f"ablate needs an ablation kind in the "
                                  f"config, got {config.kind!r}")
        elif config.kind != kind:
            raise ConfigError(f"config kind {config.kind!r} does not match "
                              f"the {kind!r} subcommand")
    else:
        if kind == "ablate":
            if not args.kind:
                raise ConfigError("ablate --preset requires --kind")
            kind = args.kind
        config = ExperimentConfig(kind=kind, preset=args.preset)
    if args.seed is not None:
        base = args.seed
        config = replace(
            config,
            train=replace(config.train, seed_init=base, seed_sample=base + 1,
                          seed_data=base + 2),
            data=replace(config.data, seed=base + 3),
            search=replace(config.search, seed=base + 4),
        )
    return config


def _print_cost_table(config: ExperimentConfig):
    space = config.resolved_space()
    flags = config.cost_flags()
    report = cost_model.macs(space.dims, maximal_config(space.dims), **flags)
    totals = report.block_totals()
    print(f"{'block':<12}{'MACs':>16}")
    for name, value in totals.items():
        print(f"{name:<12}{value:>16,}")
    print(f"{'total':<12}{report.macs:>16,}  ({report.macs / 1e9:.2f} G)")
    print(f"{'params':<12}{report.params:>16,}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "export":
            bundle = load_bundle(args.bundle)
            for path in emit_plot_data(bundle, args.out):
                print(path)
            return 0
        config = _resolve_config(args, args.command)
        bundle = run_experiment(config, args.out)
        if config.kind == "cost":
            _print_cost_table(config)
        print(f"summary: {bundle.path('summary.json')}")
        return 0
    except (ConfigError, ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
