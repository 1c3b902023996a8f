"""Command-line interface.

Subcommands: train, evaluate, ablate, verify-linear, export. Exit codes:
0 success, 1 configuration error, 2 numeric/training failure (including a
failed linear verification), 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, NumericError, TrainingError
from .harness import (
    ExperimentConfig,
    ResultTable,
    run_ablation,
    run_experiment,
    run_linear_verification,
    train_model,
)
from .models import accuracy


def _load_config(path: str) -> ExperimentConfig:
    return ExperimentConfig.from_json(Path(path).read_text())


def _write(path: str, text: str) -> None:
    Path(path).write_text(text)


def _cmd_train(args) -> int:
    config = _load_config(args.config)
    seed = args.seed if args.seed is not None else config.seeds[0]
    model, data = train_model(config, seed)
    _write(args.output, model.to_json())
    print(f"trained seed={seed} train_accuracy={accuracy(model, data):.4f} -> {args.output}")
    return 0


def _cmd_evaluate(args) -> int:
    config = _load_config(args.config)
    table = run_experiment(config)
    stem = args.output or config.output or "results"
    _write(f"{stem}.json", table.to_json())
    _write(f"{stem}.csv", table.to_csv())
    print(f"wrote {stem}.json and {stem}.csv ({len(table.rows)} rows)")
    return 0


def _cmd_ablate(args) -> int:
    config = _load_config(args.config)
    table = run_ablation(config)
    stem = args.output or (config.output or "results") + "-ablation"
    _write(f"{stem}.json", table.to_json())
    _write(f"{stem}.csv", table.to_csv())
    print(f"wrote {stem}.json and {stem}.csv ({len(table.rows)} rows)")
    return 0


def _cmd_verify_linear(args) -> int:
    report = run_linear_verification()
    for scenario in report["scenarios"]:
        tag = (
            f"slope_true={scenario['slope_true']} slope_false={scenario['slope_false']} "
            f"radius={scenario['radius']} bias_shift={scenario['bias_shift']}"
        )
        for check in scenario["checks"]:
            status = "PASS" if check["passed"] else "FAIL"
            print(f"[{status}] {tag} :: {check['name']} ({check['detail']})")
    if args.output:
        _write(args.output, json.dumps(report, indent=2))
    if not report["passed"]:
        print("linear verification FAILED")
        return 2
    print("linear verification passed")
    return 0


def _cmd_export(args) -> int:
    table = ResultTable.from_json(Path(args.results).read_text())
    _write(args.csv, table.to_csv())
    print(f"wrote {args.csv} ({len(table.rows)} rows)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hedgelab",
        description="Attack/defense experiments with bounded input perturbations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the configured model and save a checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--output", default="model.json")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("evaluate", help="run the full attack x defense grid")
    p.add_argument("config")
    p.add_argument("--output", default=None, help="output stem (writes .json and .csv)")
    p.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("ablate", help="sweep the configured ablation grids")
    p.add_argument("--config", required=True)
    p.add_argument("--output", default=None)
    p.set_defaults(fn=_cmd_ablate)

    p = sub.add_parser("verify-linear", help="exact checks on the analytic linear model")
    p.add_argument("--output", default=None, help="optional JSON report path")
    p.set_defaults(fn=_cmd_verify_linear)

    p = sub.add_parser("export", help="convert a results JSON file to CSV")
    p.add_argument("results")
    p.add_argument("--csv", required=True)
    p.set_defaults(fn=_cmd_export)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except (NumericError, TrainingError) as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"i/o failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
