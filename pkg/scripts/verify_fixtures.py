#!/usr/bin/env python3
"""Certify every bundled fixture against brute-force enumeration.

For each fixture: MILP optimum vs oracle optimum, validity of the workflow cut
pool, and big-M against the largest feasible angle difference per corridor.
"""
import sys
import time

from tepcuts.fixtures import NAMES, load_fixture
from tepcuts.harness import ExperimentConfig, PipelineArtifacts, run_once
from tepcuts.oracle import enumerate_feasible, max_angle_differences, verify_cuts


def certify(name):
    inst = load_fixture(name)
    t0 = time.perf_counter()
    art = PipelineArtifacts()
    if inst.n_candidates:
        cfg = ExperimentConfig(inst)
        run_once(inst, cfg, cfg.relaxations, artifacts=art)
    else:
        run_once(inst, ExperimentConfig(inst, relaxations=(), cuts=False), (), artifacts=art)
    sols = enumerate_feasible(inst)
    best = sols.optimum()
    verdicts = verify_cuts(list(art.pool), sols, inst)
    spans = max_angle_differences(sols, inst)
    m_slack = min((art.big_m[k] - s for k, s in spans.items()), default=0.0)
    match = abs(art.result.objective - best.objective) <= 1e-6 * max(1.0, abs(best.objective))
    ok = match and all(v.valid for v in verdicts) and m_slack >= -1e-9
    print(f"{name:14s} binaries={inst.n_candidates:2d} milp={art.result.objective:12.6f} "
          f"oracle={best.objective:12.6f} cuts={len(verdicts):3d} "
          f"invalid={sum(not v.valid for v in verdicts)} min_M_slack={m_slack:.4f} "
          f"{time.perf_counter() - t0:6.2f}s {'ok' if ok else 'FAIL'}")
    return ok


if __name__ == "__main__":
    names = sys.argv[1:] or NAMES
    sys.exit(0 if all([certify(n) for n in names]) else 1)
