"""Command-line entry point.

Subcommands: synth (generate synthetic data), ingest (parse and fold the
data), train (fit the variant grid), eval (score checkpoints), stats
(significance tests over eval reports), report (render summary tables),
ablate (the one-shot pipeline: everything above in order).

Exit codes: 0 success, 1 usage/configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, FieldRankError, UsageError
from .experiment import (
    ExperimentConfig,
    _bundle_dirs,
    _write_json,
    _write_stats,
    ingest,
    render_report,
    run_experiment,
)
from .synth import generate as synth_generate


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems must exit 1, not argparse's 2
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="fieldrank", description=__doc__.split("\n")[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment config JSON")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out", default=None, help="override the output directory")
    common.add_argument("--jobs", type=int, default=None, help="worker pool size")
    common.add_argument("--k", type=int, default=None, help="NDCG cutoff (default 20)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, description in (
        ("synth", "generate synthetic documents and click logs"),
        ("ingest", "parse the data, build labeled groups and folds"),
        ("train", "train every variant on every fold"),
        ("eval", "evaluate saved checkpoints"),
        ("stats", "run the configured significance tests"),
        ("report", "render summary tables from the bundle"),
        ("ablate", "run the full pipeline in one shot"),
    ):
        sub.add_parser(name, help=description, parents=[common])
    return parser


def load_config(args) -> ExperimentConfig:
    try:
        config = ExperimentConfig.from_file(args.config)
    except FileNotFoundError as e:
        raise UsageError(f"config file not found: {e.filename}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file is not valid JSON: {e}") from e
    if args.seed is not None:
        config.seed = args.seed
        if config.synth is not None:
            config.synth.seed = args.seed
    if args.out is not None:
        config.output_dir = args.out
    if args.jobs is not None:
        config.jobs = args.jobs
    if args.k is not None:
        config.k = args.k
    return config


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = load_config(args)
        command = args.command

        if command == "synth":
            if config.synth is None:
                raise ConfigError("config has no synth section")
            manifest = synth_generate(
                config.synth,
                config.documents_path,
                config.logs_path,
                str(Path(config.documents_path).with_suffix(".manifest.json")),
            )
            print(
                f"wrote {config.synth.n_documents} documents and "
                f"{manifest['n_events']} events to "
                f"{config.documents_path}, {config.logs_path}"
            )
        elif command == "ingest":
            folds, log, stats = ingest(config)
            dirs = _bundle_dirs(Path(config.output_dir))
            log.write(dirs["logs"] / "ingest.log")
            _write_json(dirs["logs"] / "pipeline.json", stats)
            print(json.dumps(stats, indent=2, sort_keys=True))
        elif command == "train":
            run_experiment(config, eval_stage=False, stats_stage=False, report_stage=False)
            print(f"checkpoints and training logs written under {config.output_dir}")
        elif command == "eval":
            run_experiment(config, train_stage=False, stats_stage=False, report_stage=False)
            print(f"eval reports written under {config.output_dir}/eval")
        elif command == "stats":
            dirs = _bundle_dirs(Path(config.output_dir))
            _write_stats(config, dirs)
            print(f"stats written under {config.output_dir}/stats")
        elif command == "report":
            print(render_report(config.output_dir), end="")
        else:  # ablate
            run_experiment(config)
            print(render_report(config.output_dir), end="")
        return 0
    except (UsageError, ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (FieldRankError, OSError) as e:
        print(f"runtime failure: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
