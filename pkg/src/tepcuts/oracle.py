"""Brute-force ground truth over every build decision.

For each assignment of the build variables the oracle writes the DC power
flow of the resulting network directly from the instance: built candidate
lines get Kirchhoff equalities, unbuilt ones carry no flow and no angle
coupling. No big-M appears, so the slices are the true feasible set and can
certify big-M values as well as cuts.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .instance import TepInstance, serialize_instance
from .lp import OPTIMAL, UNBOUNDED, Simplex, solve_arrays, solve_lp
from .model import (BigMTable, Constraint, MilpModel, VariableRef, build_relaxation, g, p, p0,
                    theta, y)

MAX_BINARIES = 20
VALIDITY_TOL = 1e-6


def fingerprint(instance: TepInstance) -> str:
    return hashlib.sha256(serialize_instance(instance).encode()).hexdigest()[:16]


def dcopf_slice(instance: TepInstance, built: Mapping[VariableRef, int],
                reference_bus: int = 0) -> MilpModel:
    """LP over the full variable set with every build decision fixed."""
    variables, lower, upper, obj = [], {}, {}, {}
    rows = []

    def declare(v, lo, up, cost=0.0):
        variables.append(v)
        lower[v], upper[v] = lo, up
        if cost:
            obj[v] = cost

    for c in instance.corridors:
        i, j = c.key
        for k, ln in enumerate(c.candidates, start=1):
            val = float(built[y(i, j, k)])
            declare(y(i, j, k), val, val, ln.build_cost)
    for c in instance.corridors:
        i, j = c.key
        for k, ln in enumerate(c.existing, start=1):
            declare(p0(i, j, k), -ln.capacity, ln.capacity)
    for c in instance.corridors:
        i, j = c.key
        for k, ln in enumerate(c.candidates, start=1):
            cap = ln.capacity if built[y(i, j, k)] else 0.0
            declare(p(i, j, k), -cap, cap)
    for b in instance.buses:
        if b.gen_capacity > 0:
            declare(g(b.id), 0.0, b.gen_capacity, instance.sigma * b.gen_cost)
    for b in instance.buses:
        ref = b.id == reference_bus
        declare(theta(b.id), 0.0 if ref else -math.inf, 0.0 if ref else math.inf)

    net = {b.id: {} for b in instance.buses}
    for c in instance.corridors:
        i, j = c.key
        lines = [(p0(i, j, k), ln) for k, ln in enumerate(c.existing, start=1)]
        lines += [(p(i, j, k), ln) for k, ln in enumerate(c.candidates, start=1)
                  if built[y(i, j, k)]]
        for v, ln in lines:
            net[i][v] = -1.0
            net[j][v] = 1.0
            # theta_i - theta_j = x * flow(i -> j)
            rows.append(Constraint({v: ln.reactance, theta(i): -1.0, theta(j): 1.0}, "=", 0.0,
                                   f"ohm_{v.name}", "kirchhoff"))
        if math.isfinite(c.angle_limit):
            d = {theta(i): 1.0, theta(j): -1.0}
            rows.append(Constraint(d, "<=", c.angle_limit, f"ang_up_{i}_{j}", "angle"))
            rows.append(Constraint(d, ">=", -c.angle_limit, f"ang_lo_{i}_{j}", "angle"))
    for b in instance.buses:
        coeffs = dict(net[b.id])
        if b.gen_capacity > 0:
            coeffs[g(b.id)] = 1.0
        rows.append(Constraint(coeffs, "=", b.demand, f"bal_{b.id}", "balance"))
    return MilpModel(tuple(variables), lower, upper, tuple(rows), obj, frozenset(), "slice")


def assignments(instance: TepInstance, symmetry: bool = True) -> list[dict]:
    """All build decisions; with ``symmetry`` only ordered ones per corridor.

    Ordering is only imposed on corridors whose candidates are identical.
    """
    per_corridor = []
    for c in instance.corridors:
        i, j = c.key
        refs = [y(i, j, k) for k in range(1, c.n_candidates + 1)]
        if not refs:
            continue
        same = len({(ln.reactance, ln.capacity, ln.build_cost) for ln in c.candidates}) == 1
        if symmetry and same:
            opts = [tuple(1 if k < n else 0 for k in range(len(refs)))
                    for n in range(len(refs) + 1)]
        else:
            opts = list(itertools.product((0, 1), repeat=len(refs)))
        per_corridor.append([dict(zip(refs, o)) for o in opts])
    out = []
    for combo in itertools.product(*per_corridor):
        a = {}
        for part in combo:
            a.update(part)
        out.append(a)
    out.sort(key=lambda a: tuple(a[v] for v in sorted(a)))
    return out


@dataclass
class Assignment:
    built: dict
    status: str
    objective: float
    point: dict = field(repr=False, default_factory=dict)

    @property
    def bits(self) -> str:
        return "".join(str(self.built[v]) for v in sorted(self.built))


@dataclass
class EnumeratedSolutionSet:
    entries: list
    fingerprint: str
    symmetry: bool = True
    reference_bus: int = 0
    _slices: dict = field(default_factory=dict, repr=False)

    @property
    def feasible(self) -> list[Assignment]:
        return [e for e in self.entries if e.status == OPTIMAL]

    def optimum(self) -> Assignment | None:
        feas = self.feasible
        return min(feas, key=lambda e: e.objective) if feas else None


def enumerate_feasible(instance: TepInstance, big_m: BigMTable | None = None,
                       symmetry: bool = True, reference_bus: int = 0,
                       cap: int = MAX_BINARIES) -> EnumeratedSolutionSet:
    """Solve the DC power flow LP of every build decision.

    ``big_m`` is accepted for interface symmetry with the MILP builder but is
    not needed: the slices carry no disjunctive rows.
    """
    n_bin = instance.n_candidates
    if n_bin > cap:
        raise ValueError(f"oracle refuses {n_bin} binaries (cap {cap})")
    entries, slices = [], {}
    for built in assignments(instance, symmetry):
        model = dcopf_slice(instance, built, reference_bus)
        c, A, senses, b, lb, ub = model.arrays
        st, x, obj, _ = solve_arrays(c, A, senses, b, lb, ub)
        point = dict(zip(model.variables, x.tolist())) if st == OPTIMAL else {}
        entry = Assignment(built, st, obj, point)
        entries.append(entry)
        slices[entry.bits] = model
    return EnumeratedSolutionSet(entries, fingerprint(instance), symmetry, reference_bus, slices)


@dataclass
class Verdict:
    valid: bool
    max_violation: float
    witness: str | None = None
    provenance: str = ""
    cut_id: int = 0

    def record(self) -> str:
        return json.dumps({"cut": self.cut_id, "provenance": self.provenance,
                           "valid": self.valid, "max_violation": self.max_violation,
                           "witness": self.witness})


def _check_set(solutions: EnumeratedSolutionSet, instance: TepInstance):
    if solutions.fingerprint != fingerprint(instance):
        raise ValueError("solution set was enumerated for a different instance")


def max_row_values(solutions: EnumeratedSolutionSet, directions: Sequence[Mapping]) -> dict:
    """For every feasible assignment, max of each linear form over its slice.

    Returns ``{bits: [max_0, max_1, ...]}``. One simplex per slice is reused
    for all directions.
    """
    out = {}
    for entry in solutions.feasible:
        model = solutions._slices[entry.bits]
        _, A, senses, b, lb, ub = model.arrays
        sx = Simplex(A, senses, b, lb, ub)
        sx.phase1()
        pos = model.position
        vals = []
        for coeffs in directions:
            cvec = np.zeros(len(model.variables))
            for v, a in coeffs.items():
                cvec[pos[v]] -= a
            st = sx.optimize(cvec)
            if st == UNBOUNDED:
                vals.append(math.inf)
                continue
            if st != OPTIMAL:
                raise RuntimeError(f"violation LP {st} on assignment {entry.bits}")
            vals.append(-float(cvec @ sx.solution))
        out[entry.bits] = vals
    return out


def verify_cuts(cuts: Sequence, solutions: EnumeratedSolutionSet, instance: TepInstance,
                tol: float = VALIDITY_TOL) -> list[Verdict]:
    """Certify each cut by maximising its violation over every feasible slice."""
    _check_set(solutions, instance)
    directions, index = [], {}
    plan = []
    for cut in cuts:
        rows = []
        for row in cut.rows():
            key = tuple(sorted((v.sort_key(), a) for v, a in row.coeffs.items() if v.kind != "y"))
            if key not in index:
                index[key] = len(directions)
                directions.append({v: a for v, a in row.coeffs.items() if v.kind != "y"})
            rows.append((index[key], row))
        plan.append(rows)
    maxima = max_row_values(solutions, directions)
    verdicts = []
    for n, (cut, rows) in enumerate(zip(cuts, plan)):
        worst, witness = -math.inf, None
        for entry in solutions.feasible:
            for d, row in rows:
                const = sum(a * entry.built[v] for v, a in row.coeffs.items() if v.kind == "y")
                viol = maxima[entry.bits][d] + const - row.rhs
                if viol > worst:
                    worst, witness = viol, entry.bits
        worst = max(worst, 0.0) if math.isfinite(worst) else 0.0
        verdicts.append(Verdict(worst <= tol, worst, witness if worst > tol else None,
                                cut.provenance, n))
    return verdicts


def verify_cut_validity(cut, solutions: EnumeratedSolutionSet, instance: TepInstance,
                        big_m: BigMTable | None = None, tol: float = VALIDITY_TOL) -> Verdict:
    return verify_cuts([cut], solutions, instance, tol)[0]


def max_angle_differences(solutions: EnumeratedSolutionSet, instance: TepInstance) -> dict:
    """Largest |theta_i - theta_j| per corridor over the whole feasible set."""
    _check_set(solutions, instance)
    dirs = []
    for c in instance.corridors:
        i, j = c.key
        dirs.append({theta(i): 1.0, theta(j): -1.0})
        dirs.append({theta(i): -1.0, theta(j): 1.0})
    maxima = max_row_values(solutions, dirs)
    out = {}
    for n, c in enumerate(instance.corridors):
        vals = [max(m[2 * n], m[2 * n + 1]) for m in maxima.values()]
        out[c.key] = max(vals) if vals else 0.0
    return out


def lr_objective_delta(instance: TepInstance, big_m: BigMTable | None, cuts: Iterable,
                       reference_bus: int = 0) -> tuple[float, float]:
    model = build_relaxation(instance, big_m, "linear", reference_bus)
    base = solve_lp(model)
    rows = [row for cut in cuts for row in cut.rows()]
    cut = solve_lp(model, rows)
    return base.objective, cut.objective
