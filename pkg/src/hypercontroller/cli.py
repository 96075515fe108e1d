"""Command-line entry point: ``simulate``, ``tune`` and ``report``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ._validation import SnapshotError
from .harness import (
    ExperimentPlan,
    PlanError,
    SchemaError,
    curves_from_results,
    final_regret_table,
    format_table,
    read_records_csv,
    run_plan,
    summarize,
    write_records_csv,
    write_summary_csv,
)
from .protocol import EXIT_CONFIG, ConfigError, cmd_tune, load_run_config


def cmd_simulate(plan_path, out_dir=None) -> tuple[Path, Path]:
    """Run a plan and write ``<stem>.steps.csv`` and ``<stem>.summary.csv``."""
    plan_path = Path(plan_path)
    with open(plan_path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise PlanError([f"invalid JSON: {exc}"]) from None
    plan = ExperimentPlan.from_dict(doc)
    out_dir = Path(out_dir) if out_dir else plan_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    results = run_plan(plan)
    steps = out_dir / f"{plan_path.stem}.steps.csv"
    summary = out_dir / f"{plan_path.stem}.summary.csv"
    with open(steps, "w", encoding="utf-8", newline="") as fh:
        write_records_csv(results, fh)
    with open(summary, "w", encoding="utf-8", newline="") as fh:
        write_summary_csv(summarize(curves_from_results(results)), fh)
    return steps, summary


def cmd_report(paths, out=None) -> None:
    out = out or sys.stdout
    merged: dict = {}
    for path in paths:
        with open(path, encoding="utf-8", newline="") as fh:
            data = read_records_csv(fh, source=str(path))
        for policy, per_seed in data.items():
            target = merged.setdefault(policy, {})
            for seed, series in per_seed.items():
                if seed in target:
                    raise SchemaError(f"{path}: duplicate series for policy {policy!r}, seed {seed}")
                target[seed] = series
    out.write(format_table(final_regret_table(merged)))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hypercontroller", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a regret experiment plan on generated LGDS environments")
    p.add_argument("plan", help="plan JSON document")
    p.add_argument("--out-dir", help="directory for the CSV outputs (default: next to the plan)")

    p = sub.add_parser("tune", help="drive an external trainer over line-delimited JSON on stdin/stdout")
    p.add_argument("run", help="run configuration JSON document")
    p.add_argument("--snapshot-every", type=int, default=0, metavar="K", help="snapshot every K iterations")
    p.add_argument("--snapshot", help="snapshot path (overrides the run configuration)")
    p.add_argument("--resume", metavar="PATH", help="resume from a snapshot")
    p.add_argument("--seed", type=int, help="override the controller seed")

    p = sub.add_parser("report", help="final-regret table from per-step CSV files")
    p.add_argument("csv", nargs="+")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            steps, summary = cmd_simulate(args.plan, args.out_dir)
            print(f"wrote {steps}\nwrote {summary}", file=sys.stderr)
            return 0
        if args.command == "report":
            cmd_report(args.csv)
            return 0
        if args.snapshot_every < 0:
            raise ConfigError("--snapshot-every must be non-negative")
        config = load_run_config(args.run)
        if args.seed is not None:
            config = config.with_seed(args.seed)
        return cmd_tune(
            config,
            sys.stdin,
            sys.stdout,
            snapshot_every=args.snapshot_every,
            resume=args.resume,
            snapshot_path=args.snapshot,
        )
    except (PlanError, SchemaError, ConfigError, SnapshotError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
