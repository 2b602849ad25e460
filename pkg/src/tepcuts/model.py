"""Disjunctive DC-TEP MILP, its relaxations, and big-M coefficients."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping

import networkx as nx
import numpy as np

from .instance import TepInstance, established_subgraph

KIND_ORDER = {"y": 0, "p0": 1, "p": 2, "g": 3, "theta": 4}
LABELS = ("full", "linear_relax", "transportation_relax", "hybrid_relax")
RELAX_KINDS = {"linear": "linear_relax", "transportation": "transportation_relax",
               "hybrid": "hybrid_relax"}

FEAS_TOL = 1e-6
INT_TOL = 1e-5
OBJ_RTOL = 1e-6


@dataclass(frozen=True, order=False)
class VariableRef:
    """One decision variable.

    ``kind`` is ``y`` (build), ``p0`` (existing-line flow), ``p`` (candidate
    flow), ``g`` (generation) or ``theta`` (angle). Line variables are indexed
    by ``(from_bus, to_bus, k)`` with 1-based ``k``; bus variables by ``(n,)``.
    """
    kind: str
    index: tuple

    def sort_key(self):
        return (KIND_ORDER[self.kind], self.index)

    def __lt__(self, other):
        return self.sort_key() < other.sort_key()

    @property
    def name(self) -> str:
        return self.kind + "_" + "_".join(str(i) for i in self.index)

    def __str__(self):
        return self.name


def y(i, j, k=1):
    return VariableRef("y", (i, j, k))


def p0(i, j, k=1):
    return VariableRef("p0", (i, j, k))


def p(i, j, k=1):
    return VariableRef("p", (i, j, k))


def g(n):
    return VariableRef("g", (n,))


def theta(n):
    return VariableRef("theta", (n,))


@dataclass(frozen=True)
class Constraint:
    coeffs: Mapping[VariableRef, float]
    sense: str  # '<=', '=', '>='
    rhs: float
    name: str = ""
    group: str = ""

    def activity(self, values: Mapping[VariableRef, float]) -> float:
        return sum(a * values[v] for v, a in self.coeffs.items())

    def violation(self, values: Mapping[VariableRef, float]) -> float:
        """Amount by which ``values`` violate this row (0 when satisfied)."""
        lhs = self.activity(values)
        if self.sense == "<=":
            return max(0.0, lhs - self.rhs)
        if self.sense == ">=":
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)


@dataclass(frozen=True)
class MilpModel:
    variables: tuple[VariableRef, ...]
    lower: Mapping[VariableRef, float]
    upper: Mapping[VariableRef, float]
    constraints: tuple[Constraint, ...]
    objective: Mapping[VariableRef, float]
    binaries: frozenset = frozenset()
    label: str = "full"
    meta: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        declared = set(self.variables)
        for row in self.constraints:
            for v in row.coeffs:
                if v not in declared:
                    raise ValueError(f"row {row.name!r} references undeclared {v}")
        if not self.binaries <= {v for v in declared if v.kind == "y"}:
            raise ValueError("binary set must contain build variables only")

    @cached_property
    def position(self) -> dict[VariableRef, int]:
        return {v: i for i, v in enumerate(self.variables)}

    def count(self, group: str) -> int:
        return sum(1 for r in self.constraints if r.group == group)

    def rows(self, group: str) -> list[Constraint]:
        return [r for r in self.constraints if r.group == group]

    @cached_property
    def arrays(self):
        """Dense (c, A, senses, b, lb, ub) in variable order."""
        return rows_to_arrays(self.constraints, self.variables, self.objective,
                              self.lower, self.upper)

    def with_rows(self, rows: Iterable[Constraint], label: str | None = None) -> "MilpModel":
        return replace(self, constraints=self.constraints + tuple(rows),
                       label=label or self.label)

    def with_bounds(self, bounds: Mapping[VariableRef, tuple[float, float]]) -> "MilpModel":
        lo, up = dict(self.lower), dict(self.upper)
        for v, (a, b) in bounds.items():
            lo[v], up[v] = a, b
        return replace(self, lower=lo, upper=up)


def rows_to_arrays(rows, variables, objective, lower, upper):
    pos = {v: i for i, v in enumerate(variables)}
    n, m = len(variables), len(rows)
    c = np.array([objective.get(v, 0.0) for v in variables], dtype=float)
    A = np.zeros((m, n))
    b = np.zeros(m)
    senses = []
    for r, row in enumerate(rows):
        for v, a in row.coeffs.items():
            A[r, pos[v]] += a
        b[r] = row.rhs
        senses.append(row.sense)
    lb = np.array([lower[v] for v in variables], dtype=float)
    ub = np.array([upper[v] for v in variables], dtype=float)
    return c, A, senses, b, lb, ub


# -- big-M -----------------------------------------------------------------

@dataclass(frozen=True)
class BigMTable:
    values: Mapping[tuple[int, int], float]

    def __getitem__(self, key):
        i, j = key
        return self.values[(min(i, j), max(i, j))]

    def report(self) -> str:
        lines = ["corridor\tM"]
        for (i, j), v in sorted(self.values.items()):
            lines.append(f"({i},{j})\t{v:.12g}")
        return "\n".join(lines) + "\n"


def longest_simple_path(graph: nx.Graph, s: int, t: int) -> float:
    """Exact maximum-weight simple s-t path by exhaustive DFS."""
    best = -math.inf
    adj = {u: sorted(graph[u].items()) for u in graph}
    stack = [(s, 1 << s, 0.0, iter(adj[s]))]
    while stack:
        u, used, length, it = stack[-1]
        for v, data in it:
            if used >> v & 1:
                continue
            w = length + data["weight"]
            if v == t:
                best = max(best, w)
                continue
            stack.append((v, used | 1 << v, w, iter(adj[v])))
            break
        else:
            stack.pop()
    return best


class AngleBounds:
    """Upper bounds on |theta_n - theta_m| valid for every feasible TEP point.

    Pairs joined in the established subgraph use the shortest path there
    (edge weight: smallest x*Pbar among existing lines). Other pairs use the
    longest simple path over all corridors (edge weight: largest x*Pbar),
    exact up to ``exact_threshold`` buses and the sum of all corridor weights
    beyond it. That value is lifted to the angle-limit path bound when the
    latter is finite, since an unserviced corridor only limits its angle
    difference through the corridor angle limit.
    """

    def __init__(self, instance: TepInstance, exact_threshold: int = 20):
        self.instance = instance
        self.exact_threshold = exact_threshold
        self.established = established_subgraph(instance)
        self.potential = instance.potential_graph()
        self._short = dict(nx.all_pairs_dijkstra_path_length(self.established))
        limit_graph = nx.Graph()
        limit_graph.add_nodes_from(self.potential.nodes)
        for c in instance.corridors:
            w = c.angle_limit
            if c.established:
                w = min(w, c.min_existing_cr())
            limit_graph.add_edge(c.from_bus, c.to_bus, weight=w)
        self._limit = dict(nx.all_pairs_dijkstra_path_length(limit_graph))
        self._cache = {}

    def established_cr(self, n: int, m: int) -> float | None:
        """Smallest established-path CR between n and m, or None if disconnected."""
        return self._short.get(n, {}).get(m)

    def __call__(self, n: int, m: int) -> float:
        key = (min(n, m), max(n, m))
        if key in self._cache:
            return self._cache[key]
        short = self.established_cr(*key)
        if short is not None:
            val = short
        else:
            if self.instance.n_buses <= self.exact_threshold:
                val = longest_simple_path(self.potential, *key)
            else:
                val = sum(w for _, _, w in self.potential.edges(data="weight"))
            lim = self._limit.get(key[0], {}).get(key[1], math.inf)
            if math.isfinite(lim):
                val = max(val, lim)
        self._cache[key] = val
        return val


def compute_big_m(instance: TepInstance, exact_threshold: int = 20) -> BigMTable:
    bounds = AngleBounds(instance, exact_threshold)
    return BigMTable({c.key: bounds(*c.key) for c in instance.corridors})


# -- model construction ----------------------------------------------------

def build_full_model(instance: TepInstance, big_m: BigMTable | None = None,
                     reference_bus: int = 0) -> MilpModel:
    if big_m is None:
        big_m = compute_big_m(instance)
    variables, lower, upper, obj = [], {}, {}, {}
    rows: list[Constraint] = []

    def declare(v, lo, up, cost=0.0):
        variables.append(v)
        lower[v], upper[v] = lo, up
        if cost:
            obj[v] = cost

    for c in instance.corridors:
        i, j = c.key
        for k, ln in enumerate(c.candidates, start=1):
            declare(y(i, j, k), 0.0, 1.0, ln.build_cost)
    for c in instance.corridors:
        i, j = c.key
        for k, ln in enumerate(c.existing, start=1):
            declare(p0(i, j, k), -ln.capacity, ln.capacity)
    for c in instance.corridors:
        i, j = c.key
        for k, ln in enumerate(c.candidates, start=1):
            declare(p(i, j, k), -ln.capacity, ln.capacity)
    for b in instance.buses:
        if b.gen_capacity > 0:
            declare(g(b.id), 0.0, b.gen_capacity, instance.sigma * b.gen_cost)
    for b in instance.buses:
        fixed = b.id == reference_bus
        declare(theta(b.id), 0.0 if fixed else -math.inf, 0.0 if fixed else math.inf)

    # power balance: generation + inflow - outflow = demand
    balance = {b.id: {} for b in instance.buses}
    for c in instance.corridors:
        i, j = c.key
        flows = [p0(i, j, k) for k in range(1, c.n_existing + 1)]
        flows += [p(i, j, k) for k in range(1, c.n_candidates + 1)]
        for f in flows:
            balance[i][f] = -1.0
            balance[j][f] = 1.0
    for b in instance.buses:
        coeffs = dict(balance[b.id])
        if b.gen_capacity > 0:
            coeffs[g(b.id)] = 1.0
        rows.append(Constraint(coeffs, "=", b.demand, f"balance_{b.id}", "balance"))

    for c in instance.corridors:
        i, j = c.key
        for k, ln in enumerate(c.existing, start=1):
            rows.append(Constraint({p0(i, j, k): ln.reactance, theta(i): -1.0, theta(j): 1.0},
                                   "=", 0.0, f"kirchhoff_{i}_{j}_{k}", "kirchhoff"))
        for k, ln in enumerate(c.candidates, start=1):
            yv, pv = y(i, j, k), p(i, j, k)
            rows.append(Constraint({pv: 1.0, yv: -ln.capacity}, "<=", 0.0,
                                   f"cap_up_{i}_{j}_{k}", "coupling"))
            rows.append(Constraint({pv: -1.0, yv: -ln.capacity}, "<=", 0.0,
                                   f"cap_lo_{i}_{j}_{k}", "coupling"))
        M = big_m[c.key]
        for k, ln in enumerate(c.candidates, start=1):
            yv, pv = y(i, j, k), p(i, j, k)
            rows.append(Constraint({pv: ln.reactance, theta(i): -1.0, theta(j): 1.0, yv: M},
                                   "<=", M, f"bigm_up_{i}_{j}_{k}", "bigm"))
            rows.append(Constraint({pv: -ln.reactance, theta(i): 1.0, theta(j): -1.0, yv: M},
                                   "<=", M, f"bigm_lo_{i}_{j}_{k}", "bigm"))
    for c in instance.corridors:
        if math.isfinite(c.angle_limit):
            i, j = c.key
            rows.append(Constraint({theta(i): 1.0, theta(j): -1.0}, "<=", c.angle_limit,
                                   f"angle_up_{i}_{j}", "angle"))
            rows.append(Constraint({theta(i): 1.0, theta(j): -1.0}, ">=", -c.angle_limit,
                                   f"angle_lo_{i}_{j}", "angle"))

    binaries = frozenset(v for v in variables if v.kind == "y")
    return MilpModel(tuple(variables), lower, upper, tuple(rows), obj, binaries, "full",
                     {"reference_bus": reference_bus})


def build_relaxation(instance: TepInstance, big_m: BigMTable | None, kind: str,
                     reference_bus: int = 0) -> MilpModel:
    if kind not in RELAX_KINDS:
        raise ValueError(f"unknown relaxation kind {kind!r}; expected one of {sorted(RELAX_KINDS)}")
    full = build_full_model(instance, big_m, reference_bus)
    if kind == "linear":
        return replace(full, binaries=frozenset(), label="linear_relax")
    dropped = {"kirchhoff", "bigm"} if kind == "transportation" else {"bigm"}
    rows = tuple(r for r in full.constraints if r.group not in dropped)
    return replace(full, constraints=rows, label=RELAX_KINDS[kind])


class SymmetryError(ValueError):
    """Candidate lines in a corridor are not interchangeable."""


def add_symmetry_breaking(model: MilpModel, instance: TepInstance) -> MilpModel:
    """Append y[k+1] <= y[k] for every corridor with two or more identical candidates."""
    rows = []
    for c in instance.corridors:
        if c.n_candidates < 2:
            continue
        first = c.candidates[0]
        for ln in c.candidates[1:]:
            if (ln.reactance, ln.capacity, ln.build_cost, ln.susceptance) != \
                    (first.reactance, first.capacity, first.build_cost, first.susceptance):
                raise SymmetryError(f"corridor {c.key} has non-identical candidate lines")
        i, j = c.key
        for k in range(1, c.n_candidates):
            rows.append(Constraint({y(i, j, k + 1): 1.0, y(i, j, k): -1.0}, "<=", 0.0,
                                   f"sym_{i}_{j}_{k}", "symmetry"))
    if not rows:
        return model
    return replace(model.with_rows(rows), meta={**model.meta, "symmetry": True})


# -- LP text export --------------------------------------------------------

def _fmt(a: float) -> str:
    return repr(float(a))


def _expr(coeffs: Mapping[VariableRef, float]) -> str:
    terms = []
    for v in sorted(coeffs):
        a = coeffs[v]
        if a == 0:
            continue
        sign = "-" if a < 0 else "+"
        terms.append(f"{sign} {_fmt(abs(a))} {v.name}")
    if not terms:
        return "0"
    out = " ".join(terms)
    return out[2:] if out.startswith("+ ") else out


def export_model_text(model: MilpModel, extra_rows: Iterable[Constraint] = ()) -> str:
    """Write the model in CPLEX LP format with a deterministic layout."""
    out = ["\\ tepcuts model: " + model.label, "Minimize", " obj: " + _expr(model.objective),
           "Subject To"]
    rows = list(model.constraints) + list(extra_rows)
    for n, row in enumerate(rows):
        name = row.name or f"r{n}"
        out.append(f" {name}: {_expr(row.coeffs)} {row.sense} {_fmt(row.rhs)}")
    out.append("Bounds")
    for v in sorted(model.variables):
        lo, up = model.lower[v], model.upper[v]
        if math.isinf(lo) and math.isinf(up):
            out.append(f" {v.name} free")
        elif lo == up:
            out.append(f" {v.name} = {_fmt(lo)}")
        else:
            lo_s = "-inf" if math.isinf(lo) else _fmt(lo)
            up_s = "+inf" if math.isinf(up) else _fmt(up)
            out.append(f" {lo_s} <= {v.name} <= {up_s}")
    if model.binaries:
        out.append("Binaries")
        for v in sorted(model.binaries):
            out.append(f" {v.name}")
    out.append("End")
    return "\n".join(out) + "\n"
