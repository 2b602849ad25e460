"""Command line entry point: ``tepcuts <command> --instance FILE ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .backbone import extract_flow_directions
from .bnb import MODES, solve_milp
from .cuts import FAMILIES
from .harness import (ExperimentConfig, PipelineArtifacts, emit_report, full_model,
                      parse_subset, resolve_instance, run_once, run_pipeline, run_sweep)
from .lp import OPTIMAL, solve_lp
from .model import build_relaxation, compute_big_m, export_model_text
from .oracle import enumerate_feasible, max_angle_differences, verify_cuts

log = logging.getLogger("tepcuts")


def _families(text: str) -> tuple:
    out = tuple(f.strip() for f in text.split(",") if f.strip())
    bad = set(out) - set(FAMILIES)
    if bad:
        raise argparse.ArgumentTypeError(f"unknown families {sorted(bad)}")
    return out


def _subset(text: str) -> tuple:
    try:
        return parse_subset(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _common(p: argparse.ArgumentParser):
    p.add_argument("--instance", required=True, help="instance JSON path or bundled fixture name")
    p.add_argument("--max-len", type=int, default=20)
    p.add_argument("--max-per-start", type=int, default=1000)
    p.add_argument("--mode", choices=MODES, default="upfront")
    p.add_argument("--families", type=_families, default=FAMILIES)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--no-symmetry", action="store_true")
    p.add_argument("--node-limit", type=int, default=200_000)
    p.add_argument("--time-limit", type=float, default=float("inf"))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tepcuts", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve the full MILP, optionally with generated cuts")
    _common(p)
    p.add_argument("--subsets", type=_subset, default=(),
                   help="relaxations feeding the cut pipeline, e.g. TR,HR (default: no cuts)")
    p.add_argument("--node-log", help="write the branch-and-bound node log (JSON lines)")

    p = sub.add_parser("relax", help="solve one relaxation and print its flow directions")
    _common(p)
    p.add_argument("--kind", choices=("linear", "transportation", "hybrid"), required=True)

    p = sub.add_parser("gencuts", help="print the cut pool as JSON lines")
    _common(p)
    p.add_argument("--subsets", type=_subset, default=("TR", "HR", "LR"))

    p = sub.add_parser("verify", help="certify cuts, big-M and the optimum by enumeration")
    _common(p)
    p.add_argument("--subsets", type=_subset, default=("TR", "HR", "LR"))
    p.add_argument("--all-assignments", action="store_true",
                   help="enumerate symmetric duplicates too")

    p = sub.add_parser("bench", help="timed pipeline runs")
    _common(p)
    p.add_argument("--subsets", type=_subset, default=("TR", "HR", "LR"))
    p.add_argument("--sweep", action="store_true", help="all seven subsets plus the baseline")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--baseline", action="store_true")
    p.add_argument("--concurrent", action="store_true")
    p.add_argument("--format", choices=("table", "records"), default="table")
    p.add_argument("--delimiter", default="\t")

    p = sub.add_parser("export", help="write the full model (and cuts) in LP text format")
    _common(p)
    p.add_argument("--subsets", type=_subset, default=())
    p.add_argument("--output", "-o", help="file to write (default stdout)")
    return ap


def _config(args, subsets, **extra) -> ExperimentConfig:
    return ExperimentConfig(args.instance, subsets, args.max_len, args.max_per_start,
                            args.families, bool(subsets), args.mode, args.seed,
                            args.time_limit, args.node_limit, symmetry=not args.no_symmetry,
                            **extra)


def _pipeline(args, subsets, instance) -> PipelineArtifacts:
    art = PipelineArtifacts()
    run_once(instance, _config(args, subsets), subsets, artifacts=art)
    return art


def cmd_solve(args) -> int:
    instance = resolve_instance(args.instance)
    art = _pipeline(args, args.subsets, instance)
    res = art.result
    built = sorted(v.name for v, val in res.values.items() if v.kind == "y" and val > 0.5)
    print(json.dumps({"instance": instance.name, "status": res.status,
                      "objective": res.objective, "bound": res.bound, "nodes": res.node_count,
                      "lp_solves": res.lp_solve_count, "cuts": len(art.pool),
                      "cuts_applied": res.cuts_applied_count,
                      "lazy_rejections": res.lazy_rejections, "built": built}))
    if args.node_log:
        with open(args.node_log, "w") as f:
            f.write(res.node_log_lines())
    return 0 if res.status == OPTIMAL else 1


def cmd_relax(args) -> int:
    instance = resolve_instance(args.instance)
    model = build_relaxation(instance, compute_big_m(instance), args.kind)
    cfg = _config(args, ())
    if args.kind == "linear":
        sol = solve_lp(model)
    else:
        sol = solve_milp(model, config=cfg.bnb)
    print(json.dumps({"instance": instance.name, "kind": args.kind, "status": sol.status,
                      "objective": sol.objective}))
    if sol.status != OPTIMAL:
        return 1
    sys.stdout.write(extract_flow_directions(sol, instance, label=args.kind).records())
    return 0


def cmd_gencuts(args) -> int:
    instance = resolve_instance(args.instance)
    art = _pipeline(args, args.subsets, instance)
    for cut in art.pool:
        print(json.dumps(cut.record()))
    print(json.dumps({"counts": art.pool.counts(), "total": len(art.pool)}), file=sys.stderr)
    return 0


def cmd_verify(args) -> int:
    instance = resolve_instance(args.instance)
    art = _pipeline(args, args.subsets, instance)
    sols = enumerate_feasible(instance, art.big_m, symmetry=not args.all_assignments)
    ok = True
    for verdict in verify_cuts(list(art.pool), sols, instance):
        print(verdict.record())
        ok &= verdict.valid
    spans = max_angle_differences(sols, instance)
    for key, span in spans.items():
        m_ok = art.big_m[key] >= span - 1e-6
        ok &= m_ok
        print(json.dumps({"corridor": list(key), "big_m": art.big_m[key],
                          "max_angle_difference": span, "valid": m_ok}))
    best = sols.optimum()
    res = art.result
    if best is None:
        match = res.status != OPTIMAL
    else:
        match = res.status == OPTIMAL and \
            abs(res.objective - best.objective) <= 1e-6 * max(1.0, abs(best.objective))
    ok &= match
    print(json.dumps({"milp_objective": res.objective,
                      "oracle_objective": best.objective if best else None,
                      "assignments": len(sols.entries), "feasible": len(sols.feasible),
                      "match": match}))
    return 0 if ok else 1


def cmd_bench(args) -> int:
    subsets = args.subsets
    cfg = _config(args, subsets, reps=args.reps, baseline=args.baseline,
                  concurrent=args.concurrent)
    report = run_sweep(cfg) if args.sweep else run_pipeline(cfg)
    sys.stdout.write(emit_report(report, args.format, args.delimiter))
    if not report.ok:
        print(f"stage {report.failed_stage} failed: {report.diagnostics}", file=sys.stderr)
        return 1
    return 0


def cmd_export(args) -> int:
    instance = resolve_instance(args.instance)
    if args.subsets:
        art = _pipeline(args, args.subsets, instance)
        model, _ = full_model(instance, art.big_m, not args.no_symmetry)
        text = export_model_text(model, art.pool.rows())
    else:
        model, _ = full_model(instance, compute_big_m(instance), not args.no_symmetry)
        text = export_model_text(model)
    if args.output:
        with open(args.output, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return 0


COMMANDS = {"solve": cmd_solve, "relax": cmd_relax, "gencuts": cmd_gencuts,
            "verify": cmd_verify, "bench": cmd_bench, "export": cmd_export}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except Exception as e:  # noqa: BLE001 - report and fail
        log.debug("command failed", exc_info=True)
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
