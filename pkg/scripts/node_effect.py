#!/usr/bin/env python3
"""Branch-and-bound node counts with and without each cut family.

Runs the TR+HR+LR workflow over several seeds and prints median node counts
per family selection next to the no-cut baseline.
"""
import argparse
import statistics

from tepcuts.harness import ExperimentConfig, run_pipeline

SELECTIONS = {
    "none": None,
    "lemma": ("lemma1", "lemma2"),
    "theorem1": ("theorem1",),
    "theorem2": ("theorem2",),
    "all": ("lemma1", "lemma2", "theorem1", "theorem2"),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("instance", nargs="?", default="hub_congested")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--mode", default="upfront", choices=("upfront", "usercut", "lazy"))
    args = ap.parse_args()

    print("families\tmedian_nodes\tcuts\tobjective")
    for label, families in SELECTIONS.items():
        if families is None:
            cfg = ExperimentConfig(args.instance, relaxations=(), cuts=False,
                                   reps=args.seeds)
        else:
            cfg = ExperimentConfig(args.instance, families=families, mode=args.mode,
                                   seed=0, reps=args.seeds)
        report = run_pipeline(cfg)
        if not report.ok:
            raise SystemExit(f"{label}: stage {report.failed_stage} failed: {report.diagnostics}")
        row = report.rows[0]
        print(f"{label}\t{statistics.median(row.node_counts)}\t{row.n_cuts}\t{row.objective:.6f}")


if __name__ == "__main__":
    main()
