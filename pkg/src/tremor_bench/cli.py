"""Command-line entry point: ``tremor-bench <command> --config exp.json``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .dataset import MISSING, derive_subsets, encode_categoricals, load_csv, load_schema
from .errors import ConfigError, DatasetError, PreprocessError, TremorBenchError
from .experiment import (
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_OK,
    EXIT_RUNTIME,
    STAGES,
    Pipeline,
    load_config,
)

log = logging.getLogger("tremor_bench")


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--seed", type=int, help="master seed; overrides the config")
    p.add_argument("--out", help="output directory; overrides the config")
    p.add_argument("--subset", choices=("pdrbd", "pdhc", "both"), help="subset(s) to run")
    p.add_argument("--preprocess-mode", choices=("paper", "strict"),
                   help="paper: preprocess once before CV; strict: refit inside every fold")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tremor-bench",
                                     description="PD classification benchmark on clinical and speech features.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (-v, -vv)")
    sub = parser.add_subparsers(dest="command", required=True)

    helps = {
        "run": "full pipeline: split, preprocess, validate, select, tune, test",
        "validate": "cross-validate every configured algorithm",
        "tune": "grid search every configured algorithm (no selection step)",
        "evaluate": "score saved models on the test split",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        _add_run_options(p)
        if name == "evaluate":
            p.add_argument("--models", required=True,
                           help="output directory of an earlier run holding <subset>/models/*.json")

    p = sub.add_parser("inspect-data", help="print schema summary and class counts")
    p.add_argument("--config", help="experiment config naming dataset and schema")
    p.add_argument("--dataset", help="CSV file (instead of --config)")
    p.add_argument("--schema", help="schema JSON (instead of --config)")

    p = sub.add_parser("make-synthetic", help="write a synthetic dataset and a matching config")
    p.add_argument("--out", required=True, help="directory to write into")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _inspect(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        dataset, schema_path = cfg.resolve(cfg.dataset), cfg.resolve(cfg.schema)
    elif args.dataset and args.schema:
        dataset, schema_path = Path(args.dataset), Path(args.schema)
    else:
        raise ConfigError("inspect-data needs --config or both --dataset and --schema")
    schema = load_schema(schema_path)
    table = encode_categoricals(load_csv(dataset, schema))
    kinds = {}
    for kind in schema.kinds:
        kinds[kind] = kinds.get(kind, 0) + 1
    summary = {
        "rows": table.n_rows,
        "column_kinds": kinds,
        "group_counts": table.group_counts(),
        "columns_with_missing": sum(
            1 for c in table.column_names if any(v is MISSING for v in table.column(c))),
        "subsets": {},
    }
    for ds in derive_subsets(table):
        name = ds.positive_class_name + ds.negative_class_name
        summary["subsets"][name] = {"rows": ds.n_samples, "features": ds.n_features,
                                    "class_counts": ds.class_counts()}
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def _make_synthetic(args) -> int:
    from .synthetic import write_synthetic_dataset

    csv_path, schema_path = write_synthetic_dataset(args.out, seed=args.seed)
    config = {
        "dataset": csv_path.name,
        "schema": schema_path.name,
        "subset": "both",
        "seed": 42,
        "out": "results",
    }
    cfg_path = Path(args.out) / "experiment.json"
    cfg_path.write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {csv_path}, {schema_path}, {cfg_path}")
    return EXIT_OK


def _pipeline(args) -> int:
    cfg = load_config(args.config, seed=args.seed, subset=args.subset,
                      preprocess_mode=args.preprocess_mode)
    out = Path(args.out) if args.out else None
    pipe = Pipeline(cfg, out)
    models = Path(args.models) if args.command == "evaluate" else None
    report = pipe.execute(STAGES[args.command], models_from=models)
    if report.status != "complete":
        print(f"error in stage {report.failed_stage}: {report.error}", file=sys.stderr)
        print(f"partial artifacts written to {pipe.out_dir}", file=sys.stderr)
        return report.exit_code
    print((pipe.out_dir / "report.md").read_text(encoding="utf-8"), end="")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "inspect-data":
            return _inspect(args)
        if args.command == "make-synthetic":
            return _make_synthetic(args)
        return _pipeline(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DatasetError, PreprocessError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TremorBenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
