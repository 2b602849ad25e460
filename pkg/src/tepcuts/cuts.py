"""Path-based angular valid inequalities.

Every cut is stored as ``|expr| + build . y <= rhs`` where ``expr`` is linear
in existing-line flows (lemma cuts) or bus angles (theorem cuts). It expands
to the two rows ``expr + build.y <= rhs`` and ``-expr + build.y <= rhs``.

Along an existing line of corridor (lo, hi) Kirchhoff's law reads
``theta_lo - theta_hi = x * p0``, so a step a -> b contributes
``-x * p0`` when a < b and ``+x * p0`` when a > b to ``theta_end - theta_start``.
Summing over a path telescopes to the end-to-start angle difference.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .backbone import (DirectedPath, FlowOverlay, ParallelFamily, enumerate_paths,
                       group_parallel)
from .bnb import CutPool
from .instance import TepInstance
from .model import AngleBounds, Constraint, VariableRef, p0, theta, y

PROVENANCES = ("lemma1", "lemma2", "theorem1", "theorem1_strengthened", "theorem2")
FAMILIES = ("lemma1", "lemma2", "theorem1", "theorem2")
MAX_LINE_PATHS = 16


class CutScopeError(ValueError):
    """The requested cut family does not apply to this path."""


@dataclass(frozen=True)
class PathVi:
    provenance: str
    coeffs: Mapping[VariableRef, float]
    rhs: float
    build_coeffs: Mapping[VariableRef, float] = field(default_factory=dict)
    path: tuple = ()
    source: str = ""

    @property
    def lower(self) -> float:
        return -self.rhs

    @property
    def upper(self) -> float:
        return self.rhs

    def rows(self) -> list[Constraint]:
        tag = f"{self.provenance}_{'_'.join(map(str, self.path))}"
        up = {**self.coeffs, **self.build_coeffs}
        lo = {**{v: -a for v, a in self.coeffs.items()}, **self.build_coeffs}
        return [Constraint(up, "<=", self.rhs, tag + "_u", "cut"),
                Constraint(lo, "<=", self.rhs, tag + "_l", "cut")]

    def violation(self, values: Mapping[VariableRef, float]) -> float:
        return max(row.violation(values) for row in self.rows())

    def canonical_key(self):
        items = sorted((v.sort_key(), round(a, 12)) for v, a in self.coeffs.items() if a != 0)
        if items and items[0][1] < 0:
            items = [(k, -a) for k, a in items]
        build = sorted((v.sort_key(), round(a, 12)) for v, a in self.build_coeffs.items() if a != 0)
        return (tuple(items), tuple(build), round(self.rhs, 12))

    def record(self) -> dict:
        return {
            "provenance": self.provenance,
            "path": list(self.path),
            "lower": self.lower,
            "upper": self.upper,
            "coeffs": [[v.name, a] for v, a in sorted(self.coeffs.items())],
            "build_coeffs": [[v.name, a] for v, a in sorted(self.build_coeffs.items())],
        }


@dataclass(frozen=True)
class CrValue:
    path: tuple
    value: float
    selection: tuple


# -- line selection and CR -------------------------------------------------

def default_selection(path: DirectedPath, instance: TepInstance) -> tuple:
    """Tightest existing line on established corridors, first candidate elsewhere."""
    sel = []
    for i, j in path.corridors:
        c = instance.corridor(i, j)
        if c.established:
            k = min(range(c.n_existing), key=lambda n: c.existing[n].cr) + 1
            sel.append(("existing", k))
        else:
            sel.append(("candidate", 1))
    return tuple(sel)


def cr_product(path: DirectedPath, instance: TepInstance, selection=None) -> CrValue:
    selection = tuple(selection) if selection is not None else default_selection(path, instance)
    if len(selection) != len(path):
        raise ValueError("selection must name one line per corridor on the path")
    total = 0.0
    for (i, j), (kind, k) in zip(path.corridors, selection):
        try:
            total += instance.corridor(i, j).line(kind, k).cr
        except IndexError as e:
            raise ValueError(str(e)) from None
    return CrValue(path.buses, total, selection)


def _flow_expression(path: DirectedPath, instance: TepInstance, selection) -> dict:
    coeffs = {}
    for (a, b), (kind, k) in zip(path.steps, selection):
        if kind != "existing":
            raise CutScopeError("flow expressions use existing lines only")
        i, j = min(a, b), max(a, b)
        x = instance.corridor(i, j).line("existing", k).reactance
        v = p0(i, j, k)
        coeffs[v] = coeffs.get(v, 0.0) + (-x if a < b else x)
    return coeffs


def _require_established(path: DirectedPath, instance: TepInstance):
    for i, j in path.corridors:
        if not instance.corridor(i, j).established:
            raise CutScopeError(f"corridor ({i},{j}) on path {path.buses} has no existing line")


# -- lemma cuts ------------------------------------------------------------

def lemma1_cut(path: DirectedPath, instance: TepInstance, selection=None) -> PathVi:
    _require_established(path, instance)
    cr = cr_product(path, instance, selection)
    return PathVi("lemma1", _flow_expression(path, instance, cr.selection), cr.value,
                  path=path.buses)


def lemma2_cuts(family: ParallelFamily, instance: TepInstance, selections=None) -> list[PathVi]:
    selections = selections or [None] * len(family.members)
    for member in family.members:
        _require_established(member, instance)
    crs = [cr_product(m, instance, s) for m, s in zip(family.members, selections)]
    bound = min(cr.value for cr in crs)
    src = "|".join("-".join(map(str, m.buses)) for m in family.members)
    return [PathVi("lemma2", _flow_expression(m, instance, cr.selection), bound,
                   path=m.buses, source=src)
            for m, cr in zip(family.members, crs)]


# -- theorem cuts ----------------------------------------------------------

def _angle_cut(provenance, path, cr, bound, builds, n_expansion) -> PathVi | None:
    """|theta_end - theta_start| <= cr + (bound - cr) * (n_expansion - sum builds).

    Returns None when ``bound < cr``: the coefficient would turn negative and
    the row would stop being valid once two or more lines are unbuilt.
    """
    slope = bound - cr
    if slope < 0:
        return None
    coeffs = {theta(path.end): 1.0, theta(path.start): -1.0}
    build = {v: slope for v in builds} if slope else {}
    return PathVi(provenance, coeffs, cr + slope * n_expansion, build, path.buses)


def theorem1_cut(path: DirectedPath, instance: TepInstance, upper: float,
                 established_min: float | None = None) -> list[PathVi]:
    """Angle cuts for a path crossing at least one expansion corridor.

    ``upper`` bounds |theta_start - theta_end| over all feasible points;
    ``established_min`` is the smallest CR over established start-end paths,
    if any exists, and yields the strengthened form.
    """
    expansion = [(i, j) for i, j in path.corridors if not instance.corridor(i, j).established]
    if not expansion:
        raise CutScopeError(f"path {path.buses} has no expansion corridor; use lemma1")
    cr = cr_product(path, instance).value
    builds = [y(i, j, 1) for i, j in expansion]
    out = [_angle_cut("theorem1", path, cr, upper, builds, len(expansion))]
    if established_min is not None:
        out.append(_angle_cut("theorem1_strengthened", path, cr, established_min, builds,
                              len(expansion)))
    return [cut for cut in out if cut is not None]


def theorem2_cut(path: DirectedPath, selection: Sequence, instance: TepInstance,
                 upper: float, established_min: float | None = None) -> list[PathVi]:
    """Line-path version: one named line (existing or candidate) per corridor."""
    cr = cr_product(path, instance, selection)
    builds = [y(i, j, k) for (i, j), (kind, k) in zip(path.corridors, cr.selection)
              if kind == "candidate"]
    if not builds:
        return [PathVi("theorem2", {theta(path.end): 1.0, theta(path.start): -1.0}, cr.value,
                       {}, path.buses)]
    out = [_angle_cut("theorem2", path, cr.value, upper, builds, len(builds))]
    if established_min is not None:
        out.append(_angle_cut("theorem2", path, cr.value, established_min, builds, len(builds)))
    return [cut for cut in out if cut is not None]


def line_paths(path: DirectedPath, instance: TepInstance, limit: int = MAX_LINE_PATHS):
    """Line selections for a path: tightest existing line on established
    corridors, every candidate line on expansion corridors."""
    choices = []
    for i, j in path.corridors:
        c = instance.corridor(i, j)
        if c.established:
            k = min(range(c.n_existing), key=lambda n: c.existing[n].cr) + 1
            choices.append([("existing", k)])
        else:
            choices.append([("candidate", k) for k in range(1, c.n_candidates + 1)])
    return list(itertools.islice(itertools.product(*choices), limit))


def _identical_candidates(instance: TepInstance) -> bool:
    for c in instance.corridors:
        sig = {(ln.reactance, ln.capacity, ln.build_cost) for ln in c.candidates}
        if len(sig) > 1:
            return False
    return True


def generate_cut_pool(instance: TepInstance, overlay: FlowOverlay, max_len: int = 20,
                      max_per_start: int = 1000, families: Iterable[str] = FAMILIES,
                      symmetry: bool = True, injection_mode: str = "upfront",
                      seed: int | None = None, bounds: AngleBounds | None = None) -> CutPool:
    """Enumerate overlay paths and turn them into a deduplicated cut pool.

    With ``symmetry`` off (or non-identical candidates) theorem1 cuts are
    replaced by theorem2 line-path cuts. A ``seed`` shuffles the pool order.
    """
    families = set(families)
    unknown = families - set(FAMILIES)
    if unknown:
        raise ValueError(f"unknown cut families: {sorted(unknown)}")
    bounds = bounds or AngleBounds(instance)
    paths = enumerate_paths(overlay, max_len, max_per_start)
    established = [pth for pth in paths
                   if all(instance.corridor(i, j).established for i, j in pth.corridors)]
    est_set = set(established)
    mixed = [pth for pth in paths if pth not in est_set]
    use_t1 = symmetry and _identical_candidates(instance)

    cuts: list[PathVi] = []
    if "lemma1" in families:
        cuts += [lemma1_cut(pth, instance) for pth in established]
    if "lemma2" in families:
        for fam in group_parallel(established):
            cuts += lemma2_cuts(fam, instance)
    want_t2 = "theorem2" in families or ("theorem1" in families and not use_t1)
    for pth in mixed:
        upper = bounds(pth.start, pth.end)
        est = bounds.established_cr(pth.start, pth.end)
        if "theorem1" in families and use_t1:
            cuts += theorem1_cut(pth, instance, upper, est)
        if want_t2:
            for sel in line_paths(pth, instance):
                cuts += theorem2_cut(pth, sel, instance, upper, est)
    pool = CutPool(cuts, injection_mode)
    if seed is not None:
        random.Random(seed).shuffle(pool.cuts)
    return pool
