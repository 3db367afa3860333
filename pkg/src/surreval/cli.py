"""Command-line entry points.

Subcommands: run-scene, run-backtest, emit-bound-table, assess, shapley.
Exit codes: 0 success, 2 configuration/ingestion error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .bounds import TABLE_NS, TABLE_SIGMAS
from .errors import ConfigError, IngestionError, SurrevalError
from .harness import (
    ExperimentConfig,
    assess_errors,
    emit_bound_table,
    load_errors_csv,
    run_backtest,
    run_scene,
    run_shapley,
)


def _load_config(args) -> ExperimentConfig:
    config = ExperimentConfig.load(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    if getattr(args, "replicates", None) is not None:
        overrides["replicates"] = args.replicates
    return dataclasses.replace(config, **overrides) if overrides else config


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default=None, help="override the output directory")
    p.add_argument("--replicates", type=int, default=None, help="override replicate count")
    p.add_argument("--jobs", type=int, default=1, help="parallel replicate workers")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="surreval", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run-scene", help="replicated scene experiment with baselines and certificates")
    _add_run_flags(p)

    p = sub.add_parser("run-backtest", help="conditional evaluation on the synthetic market")
    _add_run_flags(p)

    p = sub.add_parser("emit-bound-table", help="write the quick-reference certificate tables")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--sigmas", default=None, help="comma list of sigma values")

    p = sub.add_parser("assess", help="audit certificate assumptions on an errors file")
    p.add_argument("--errors", required=True, help="CSV with loss[,residual] columns")
    p.add_argument("--out", default="assessment.json")
    p.add_argument("--tests", default="IID,ID,Bias,GroupBias")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--model-name", default="Het(Linear)")
    p.add_argument("--metric-name", default="RMSE")
    p.add_argument("--n-subsets", type=int, default=30)
    p.add_argument("--subset-frac", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--loss-scale", type=float, default=1.0, help="divisor applied to raw losses")
    p.add_argument("--iide-claimed", action="store_true")
    p.add_argument("--iris-claimed", action="store_true")

    p = sub.add_parser("shapley", help="input-block attribution for the configured experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run-scene":
            result = run_scene(_load_config(args), jobs=args.jobs)
            print(f"wrote scene reports to {result['out_dir']}")
        elif args.command == "run-backtest":
            result = run_backtest(_load_config(args), jobs=args.jobs)
            print(f"wrote backtest reports to {result['out_dir']}")
        elif args.command == "emit-bound-table":
            sigmas = TABLE_SIGMAS
            if args.sigmas:
                sigmas = tuple(float(s) for s in args.sigmas.split(","))
            gen_path, causal_path = emit_bound_table(args.out, sigmas=sigmas, ns=TABLE_NS)
            print(f"wrote {gen_path} and {causal_path}")
        elif args.command == "assess":
            errors = load_errors_csv(
                args.errors,
                iide_claimed=args.iide_claimed,
                iris_claimed=args.iris_claimed,
                loss_scale=args.loss_scale,
            )
            report = assess_errors(
                errors,
                args.out,
                tests=tuple(t.strip() for t in args.tests.split(",") if t.strip()),
                model_name=args.model_name,
                metric_name=args.metric_name,
                n_subsets=args.n_subsets,
                subset_frac=args.subset_frac,
                alpha=args.alpha,
                seed=args.seed,
            )
            print(json.dumps({k: v["p_value"] for k, v in report["results"].items()}, indent=2))
        elif args.command == "shapley":
            config = ExperimentConfig.load(args.config)
            overrides = {}
            if args.seed is not None:
                overrides["seed"] = args.seed
            if args.out is not None:
                overrides["out_dir"] = args.out
            if overrides:
                config = dataclasses.replace(config, **overrides)
            report = run_shapley(config)
            print(json.dumps(report.get("shapley", {}), indent=2))
    except (ConfigError, IngestionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SurrevalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
