"""Best-bound branch-and-bound over the simplex, with pool-driven cuts.

Cut injection modes:

* ``upfront``: every pool cut is a row of the root LP.
* ``usercut``: at each node the LP optimum is screened against the whole
  pool; violated cuts are added to that node and inherited by its subtree,
  and the node LP is re-solved until nothing is violated.
* ``lazy``: only LP-integral node optima are screened; a violated candidate
  is rejected, the violated cuts are added to the node, and the node LP is
  re-solved.
"""
from __future__ import annotations

import heapq
import json
import logging
import math
import time
from dataclasses import dataclass, field
import numpy as np

from .lp import FAILED, INFEASIBLE, OPTIMAL, UNBOUNDED, solve_arrays
from .model import INT_TOL, OBJ_RTOL, MilpModel, rows_to_arrays

log = logging.getLogger(__name__)

MODES = ("upfront", "usercut", "lazy")
VIOLATION_TOL = 1e-6


@dataclass
class CutPool:
    """Deduplicated list of valid inequalities and the way they are injected."""
    cuts: list = field(default_factory=list)
    injection_mode: str = "upfront"

    def __post_init__(self):
        if self.injection_mode not in MODES:
            raise ValueError(f"injection mode must be one of {MODES}")
        unique, seen = [], set()
        for cut in self.cuts:
            key = cut.canonical_key()
            if key not in seen:
                seen.add(key)
                unique.append(cut)
        self.cuts = unique

    def __len__(self):
        return len(self.cuts)

    def __iter__(self):
        return iter(self.cuts)

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for cut in self.cuts:
            out[cut.provenance] = out.get(cut.provenance, 0) + 1
        return out

    def rows(self):
        return [row for cut in self.cuts for row in cut.rows()]


@dataclass
class BnbConfig:
    node_limit: int = 200_000
    time_limit: float = math.inf
    int_tol: float = INT_TOL
    gap_rtol: float = OBJ_RTOL
    keep_log: bool = True


@dataclass
class BnbResult:
    status: str
    objective: float
    values: dict
    bound: float
    node_count: int
    lp_solve_count: int
    cuts_applied_count: int
    wall_time: float
    lazy_rejections: int = 0
    node_log: list = field(default_factory=list, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def node_log_lines(self) -> str:
        return "".join(json.dumps(rec) + "\n" for rec in self.node_log)


def _fractionality(x: np.ndarray, idx: np.ndarray) -> np.ndarray:
    vals = x[idx]
    return np.abs(vals - np.round(vals))


def solve_milp(model: MilpModel, cuts: CutPool | None = None,
               config: BnbConfig | None = None) -> BnbResult:
    if model.label not in ("full", "transportation_relax", "hybrid_relax"):
        raise ValueError(f"solve_milp expects a MILP model, got label {model.label!r}")
    config = config or BnbConfig()
    cuts = cuts or CutPool()
    mode = cuts.injection_mode
    start = time.monotonic()

    c, A, senses, b, lb0, ub0 = model.arrays
    senses = list(senses)
    pool_cuts = list(cuts)
    # one block of rows per pool cut
    cut_blocks = []
    for cut in pool_cuts:
        _, Ac, sc, bc, _, _ = rows_to_arrays(cut.rows(), model.variables, {}, model.lower,
                                             model.upper)
        cut_blocks.append((Ac, sc, bc))
    if mode == "upfront" and cut_blocks:
        A = np.vstack([A] + [blk[0] for blk in cut_blocks])
        senses = senses + [s for blk in cut_blocks for s in blk[1]]
        b = np.concatenate([b] + [blk[2] for blk in cut_blocks])
    if cut_blocks:
        pool_A = np.vstack([blk[0] for blk in cut_blocks])
        pool_b = np.concatenate([blk[2] for blk in cut_blocks])
        owner = np.repeat(np.arange(len(cut_blocks)), [len(blk[2]) for blk in cut_blocks])
    int_idx = np.array(sorted(model.position[v] for v in model.binaries), dtype=int)

    def violated_cuts(x, active):
        if not cut_blocks:
            return []
        viol = pool_A @ x - pool_b
        hit = np.unique(owner[viol > VIOLATION_TOL])
        return [int(k) for k in hit if k not in active]

    def node_lp(fixes, active):
        lb, ub = lb0.copy(), ub0.copy()
        for j, v in fixes.items():
            lb[j] = ub[j] = v
        if active and mode != "upfront":
            ks = sorted(active)
            An = np.vstack([A] + [cut_blocks[k][0] for k in ks])
            sn = senses + [s for k in ks for s in cut_blocks[k][1]]
            bn = np.concatenate([b] + [cut_blocks[k][2] for k in ks])
        else:
            An, sn, bn = A, senses, b
        return solve_arrays(c, An, sn, bn, lb, ub)

    incumbent, inc_x = math.inf, None
    heap = [(-math.inf, 0, 0, {}, frozenset())]
    seq = 1
    nodes = lp_solves = applied = rejections = failures = 0
    node_log = []
    status = None
    while heap:
        if nodes >= config.node_limit or time.monotonic() - start > config.time_limit:
            status = "limit"
            break
        parent_bound, neg_depth, _, fixes, active = heapq.heappop(heap)
        depth = -neg_depth
        tol = config.gap_rtol * max(1.0, abs(incumbent)) if math.isfinite(incumbent) else 0.0
        if parent_bound >= incumbent - tol:
            continue
        nodes += 1
        added_here = rejected_here = 0
        event = None
        while True:
            st, x, obj, _ = node_lp(fixes, active)
            lp_solves += 1
            if st != OPTIMAL:
                if st == FAILED:
                    failures += 1
                    log.warning("numerical failure in node LP at depth %d", depth)
                elif st == UNBOUNDED:
                    raise RuntimeError("node LP unbounded; model needs bounded variables")
                event = st
                break
            if obj >= incumbent - tol:
                event = "pruned"
                break
            if mode == "usercut":
                new = violated_cuts(x, active)
                if new:
                    active = active | frozenset(new)
                    applied += len(new)
                    added_here += len(new)
                    continue
            frac = _fractionality(x, int_idx) if int_idx.size else np.zeros(0)
            if not np.any(frac > config.int_tol):
                if mode == "lazy":
                    new = violated_cuts(x, active)
                    if new:
                        active = active | frozenset(new)
                        applied += len(new)
                        added_here += len(new)
                        rejected_here += 1
                        continue
                incumbent, inc_x = obj, x
                tol = config.gap_rtol * max(1.0, abs(incumbent))
                event = "incumbent"
                break
            # most fractional, lowest index on ties
            score = np.abs(x[int_idx] - np.floor(x[int_idx]) - 0.5)
            j = int(int_idx[np.flatnonzero(score <= score.min() + 1e-12)[0]])
            for val in (0.0, 1.0):
                heapq.heappush(heap, (obj, -(depth + 1), seq, {**fixes, j: val}, active))
                seq += 1
            event = "branch"
            break
        rejections += rejected_here
        open_bound = min((h[0] for h in heap), default=math.inf)
        best_bound = min(incumbent, open_bound)
        if config.keep_log:
            node_log.append({
                "node": nodes, "depth": depth,
                "bound": obj if event not in (INFEASIBLE, FAILED) else None,
                "best_bound": best_bound if math.isfinite(best_bound) else None,
                "fractional": int(np.sum(frac > config.int_tol)) if event == "branch" else 0,
                "cuts_added": added_here, "lazy_rejections": rejected_here, "event": event,
            })

    wall = time.monotonic() - start
    if status is None:
        status = OPTIMAL if inc_x is not None else INFEASIBLE
    if status == "limit":
        open_bound = min((h[0] for h in heap), default=incumbent)
        bound = min(incumbent, open_bound)
    else:
        bound = incumbent
    values = dict(zip(model.variables, inc_x.tolist())) if inc_x is not None else {}
    if failures:
        log.warning("%d node LPs failed numerically", failures)
    return BnbResult(status, incumbent if inc_x is not None else math.nan, values, bound,
                     max(nodes, 1), lp_solves, applied if mode != "upfront" else len(pool_cuts),
                     wall, rejections, node_log)
