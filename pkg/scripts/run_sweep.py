#!/usr/bin/env python3
"""Seven-subset sweep plus the no-cut baseline on one instance.

Writes the delimited table to stdout and, with --out, the per-repetition
records next to it.

    python scripts/run_sweep.py hub_congested --reps 5 --seed 0 --out runs/
"""
import argparse
from pathlib import Path

from tepcuts.harness import ExperimentConfig, emit_report, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("instance", help="instance JSON path or bundled fixture name")
    ap.add_argument("--reps", type=int, default=3)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--mode", default="upfront", choices=("upfront", "usercut", "lazy"))
    ap.add_argument("--out", type=Path, help="directory for table.tsv and records.jsonl")
    args = ap.parse_args()

    report = run_sweep(ExperimentConfig(args.instance, reps=args.reps, seed=args.seed,
                                        mode=args.mode))
    table = emit_report(report)
    print(table, end="")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        stem = f"{report.instance}_{args.mode}"
        (args.out / f"{stem}_table.tsv").write_text(table)
        (args.out / f"{stem}_records.jsonl").write_text(emit_report(report, "records"))
    if not report.ok:
        raise SystemExit(f"stage {report.failed_stage} failed: {report.diagnostics}")


if __name__ == "__main__":
    main()
