"""Experiment driver: relax, read flow directions, search paths, cut, solve.

A run times three contiguous stages per repetition (relaxations, path
search plus cut generation, final MILP solve) and reports them next to their
sum, one row per relaxation subset.
"""
from __future__ import annotations

import csv
import io
import json
import math
import statistics
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .backbone import extract_flow_directions, intersect_overlays
from .bnb import MODES, BnbConfig, CutPool, solve_milp
from .cuts import FAMILIES, generate_cut_pool
from .fixtures import NAMES, load_fixture
from .instance import TepInstance, load_instance
from .lp import OPTIMAL, solve_lp
from .model import (AngleBounds, SymmetryError, add_symmetry_breaking, build_full_model,
                    build_relaxation, compute_big_m)

RELAXATIONS = {"TR": "transportation", "HR": "hybrid", "LR": "linear"}
SWEEP = (("TR",), ("HR",), ("LR",), ("TR", "HR"), ("TR", "LR"), ("HR", "LR"),
         ("TR", "HR", "LR"))
BASELINE = "N/A"
JOIN = "⊕"
HEADERS = ("Relaxation Models", "Relax Time", "Path Search", "Solution", "C+P+R",
           "Min C+P+R", "Max C+P+R", "Nodes", "Cuts", "Objective")


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


def parse_subset(text: str) -> tuple[str, ...]:
    """``"TR,HR"``, ``"TR+HR"`` or ``"TR⊕HR"`` to a canonical tuple; ``N/A`` is empty."""
    text = text.strip()
    if text.upper() in (BASELINE, "NONE", ""):
        return ()
    parts = [p.strip().upper() for p in text.replace(JOIN, ",").replace("+", ",").split(",")]
    bad = [p for p in parts if p not in RELAXATIONS]
    if bad:
        raise ValueError(f"unknown relaxation code(s) {bad}; use TR, HR, LR")
    return tuple(code for code in RELAXATIONS if code in parts)


def subset_label(subset) -> str:
    return JOIN.join(subset) if subset else BASELINE


def resolve_instance(ref) -> TepInstance:
    """Load a JSON instance by path, falling back to a bundled fixture name."""
    if isinstance(ref, TepInstance):
        return ref
    path = Path(ref)
    if path.exists():
        return load_instance(path)
    if str(ref) in NAMES:
        return load_fixture(str(ref))
    raise FileNotFoundError(f"no instance file or bundled fixture named {ref!r}")


@dataclass
class ExperimentConfig:
    instance: object
    relaxations: tuple = ("TR", "HR", "LR")
    max_len: int = 20
    max_per_start: int = 1000
    families: tuple = FAMILIES
    cuts: bool = True
    mode: str = "upfront"
    seed: int | None = None
    time_limit: float = math.inf
    node_limit: int = 200_000
    reps: int = 1
    symmetry: bool = True
    baseline: bool = False
    concurrent: bool = False

    def __post_init__(self):
        if isinstance(self.relaxations, str):
            self.relaxations = parse_subset(self.relaxations)
        self.relaxations = tuple(code for code in RELAXATIONS if code in self.relaxations)
        self.families = tuple(self.families)
        if self.cuts and not self.relaxations:
            raise ValueError("cut generation needs at least one relaxation")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        unknown = set(self.families) - set(FAMILIES)
        if unknown:
            raise ValueError(f"unknown cut families {sorted(unknown)}")

    @property
    def bnb(self) -> BnbConfig:
        return BnbConfig(node_limit=self.node_limit, time_limit=self.time_limit, keep_log=False)


@dataclass
class Repetition:
    relax_time: float
    path_search_time: float
    solution_time: float
    total: float
    objective: float
    node_count: int
    status: str
    lazy_rejections: int = 0


@dataclass
class ExperimentRow:
    label: str
    repetitions: list = field(default_factory=list)
    cut_counts: dict = field(default_factory=dict)
    comparable: bool = True

    def _stat(self, name, fn=statistics.fmean):
        vals = [getattr(r, name) for r in self.repetitions]
        return fn(vals) if vals else math.nan

    @property
    def relax_time(self):
        return self._stat("relax_time")

    @property
    def path_search_time(self):
        return self._stat("path_search_time")

    @property
    def solution_time(self):
        return self._stat("solution_time")

    @property
    def total(self):
        return self._stat("total")

    @property
    def total_min(self):
        return self._stat("total", min)

    @property
    def total_max(self):
        return self._stat("total", max)

    @property
    def node_counts(self) -> list[int]:
        return [r.node_count for r in self.repetitions]

    @property
    def objective(self):
        return self.repetitions[0].objective if self.repetitions else math.nan

    @property
    def n_cuts(self) -> int:
        return sum(self.cut_counts.values())


@dataclass
class ExperimentReport:
    instance: str
    rows: list = field(default_factory=list)
    failed_stage: str | None = None
    diagnostics: str = ""

    @property
    def ok(self) -> bool:
        return self.failed_stage is None

    def row(self, label: str) -> ExperimentRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)


@dataclass
class PipelineArtifacts:
    """Everything a single repetition produced, for callers that want more than timings."""
    big_m: object = None
    relaxed: dict = field(default_factory=dict)
    overlay: object = None
    pool: CutPool | None = None
    result: object = None


def _relax(instance, big_m, code, config):
    model = build_relaxation(instance, big_m, RELAXATIONS[code])
    if code == "LR":
        return solve_lp(model)
    return solve_milp(model, config=config.bnb)


def full_model(instance: TepInstance, big_m, symmetry: bool = True):
    """The full MILP plus ordering rows; the flag reports whether ordering applied."""
    model = build_full_model(instance, big_m)
    if not symmetry:
        return model, False
    try:
        return add_symmetry_breaking(model, instance), True
    except SymmetryError:
        return model, False


def run_once(instance: TepInstance, config: ExperimentConfig, subset, rep: int = 0,
             artifacts: PipelineArtifacts | None = None) -> tuple[Repetition, dict]:
    """One repetition; raises StageError naming the failing stage."""
    art = artifacts if artifacts is not None else PipelineArtifacts()
    use_cuts = config.cuts and bool(subset)
    t0 = time.perf_counter()
    stage = "big_m"
    try:
        big_m = compute_big_m(instance)
        art.big_m = big_m
        model, symmetric = full_model(instance, big_m, config.symmetry)
        overlays = []
        stage = "relax"
        if use_cuts:
            for code in subset:
                sol = _relax(instance, big_m, code, config)
                if sol.status != OPTIMAL:
                    raise StageError("relax", f"{code} relaxation is {sol.status}")
                art.relaxed[code] = sol
                overlays.append(extract_flow_directions(sol, instance, label=code))
        t1 = time.perf_counter()
        stage = "paths"
        pool = CutPool(injection_mode=config.mode)
        if use_cuts:
            overlay = intersect_overlays(overlays)
            art.overlay = overlay
            seed = None if config.seed is None else config.seed + rep
            pool = generate_cut_pool(instance, overlay, config.max_len, config.max_per_start,
                                     config.families, symmetric, config.mode, seed,
                                     AngleBounds(instance))
        art.pool = pool
        t2 = time.perf_counter()
        stage = "solve"
        res = solve_milp(model, pool, config.bnb)
        art.result = res
        t3 = time.perf_counter()
    except StageError:
        raise
    except Exception as e:  # noqa: BLE001 - stage boundary
        raise StageError(stage, f"{type(e).__name__}: {e}") from e
    rep_rec = Repetition(t1 - t0, t2 - t1, t3 - t2, t3 - t0, res.objective, res.node_count,
                         res.status, res.lazy_rejections)
    return rep_rec, pool.counts()


def _run_row(instance, config, subset, report) -> ExperimentRow:
    row = ExperimentRow(subset_label(subset), comparable=not config.concurrent)
    if config.concurrent and config.reps > 1:
        with ThreadPoolExecutor() as ex:
            futures = [ex.submit(run_once, instance, config, subset, r)
                       for r in range(config.reps)]
            outs = [f.result() for f in futures]
    else:
        outs = [run_once(instance, config, subset, r) for r in range(config.reps)]
    for rep, counts in outs:
        row.repetitions.append(rep)
        row.cut_counts = counts
    report.rows.append(row)
    return row


def _run_rows(config: ExperimentConfig, subsets) -> ExperimentReport:
    report = ExperimentReport(str(getattr(config.instance, "name", config.instance)))
    try:
        instance = resolve_instance(config.instance)
    except Exception as e:  # noqa: BLE001
        report.failed_stage, report.diagnostics = "parse", f"{type(e).__name__}: {e}"
        return report
    report.instance = instance.name
    for subset in subsets:
        try:
            _run_row(instance, config, subset, report)
        except StageError as e:
            report.failed_stage = e.stage
            report.diagnostics = "".join(traceback.format_exception_only(type(e), e)).strip()
            return report
    return report


def run_pipeline(config: ExperimentConfig) -> ExperimentReport:
    subsets = []
    if config.cuts and config.relaxations:
        subsets.append(config.relaxations)
    if config.baseline or not subsets:
        subsets.append(())
    return _run_rows(config, subsets)


def run_sweep(config: ExperimentConfig) -> ExperimentReport:
    """All seven relaxation subsets in table order, then the no-cut baseline."""
    subsets = list(SWEEP) + [()]
    return _run_rows(config, subsets)


# -- output ----------------------------------------------------------------

def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else f"{v:.4f}"


def table_rows(report: ExperimentReport) -> list[list[str]]:
    out = []
    for row in report.rows:
        out.append([row.label, _fmt(row.relax_time), _fmt(row.path_search_time),
                    _fmt(row.solution_time), _fmt(row.total), _fmt(row.total_min),
                    _fmt(row.total_max), str(int(statistics.median(row.node_counts))),
                    str(row.n_cuts), f"{row.objective:.6f}"])
    return out


def report_records(report: ExperimentReport) -> str:
    lines = []
    for row in report.rows:
        for n, rep in enumerate(row.repetitions):
            rec = {"instance": report.instance, "relaxations": row.label, "rep": n,
                   **asdict(rep), "cut_counts": row.cut_counts, "comparable": row.comparable}
            lines.append(json.dumps(rec, sort_keys=True))
    if report.failed_stage:
        lines.append(json.dumps({"instance": report.instance, "failed_stage": report.failed_stage,
                                 "diagnostics": report.diagnostics}))
    return "".join(line + "\n" for line in lines)


def report_from_records(text: str) -> ExperimentReport:
    report = None
    fields = Repetition.__dataclass_fields__
    for line in text.splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        if report is None:
            report = ExperimentReport(rec["instance"])
        if "failed_stage" in rec:
            report.failed_stage, report.diagnostics = rec["failed_stage"], rec["diagnostics"]
            continue
        if not report.rows or report.rows[-1].label != rec["relaxations"]:
            report.rows.append(ExperimentRow(rec["relaxations"], [], rec["cut_counts"],
                                             rec["comparable"]))
        report.rows[-1].repetitions.append(Repetition(**{k: rec[k] for k in fields}))
    return report or ExperimentReport("")


def emit_report(report: ExperimentReport, fmt: str = "table", delimiter: str = "\t") -> str:
    if fmt == "records":
        return report_records(report)
    if fmt != "table":
        raise ValueError("format must be 'table' or 'records'")
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    writer.writerow(HEADERS)
    writer.writerows(table_rows(report))
    return buf.getvalue()
