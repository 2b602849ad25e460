"""Dense bounded-variable primal simplex.

Rows ``a x (<=|=|>=) b`` get one slack each (``a x + s = b``) whose bounds
encode the sense, so every variable lives in ``[lb, ub]`` with possibly
infinite ends. Phase 1 adds artificials only for rows whose slack cannot
absorb the initial residual. Pricing is Dantzig's rule; after a run of
degenerate pivots it switches to Bland's rule, which cannot cycle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .model import FEAS_TOL, Constraint, MilpModel, VariableRef

OPTIMAL, INFEASIBLE, UNBOUNDED, FAILED = "optimal", "infeasible", "unbounded", "failed"

PIVOT_TOL = 1e-9
DUAL_TOL = 1e-9
PRIMAL_TOL = 1e-9
DEGENERATE_RUN = 40
REFACTOR_EVERY = 60


class NumericalFailure(RuntimeError):
    pass


class Simplex:
    """Simplex state for one constraint matrix; reusable across objectives.

    After :meth:`phase1` succeeds the basis stays primal feasible, so
    :meth:`optimize` can be called repeatedly with different cost vectors.
    """

    def __init__(self, A, senses: Sequence[str], b, lb, ub, max_iter: int | None = None):
        A = np.asarray(A, dtype=float)
        self.m, self.n = A.shape
        m, n = self.m, self.n
        self.A, self.b = A, np.asarray(b, dtype=float)
        slo = np.array([0.0 if s in ("<=", "=") else -math.inf for s in senses])
        sup = np.array([0.0 if s in (">=", "=") else math.inf for s in senses])
        self.lb = np.concatenate([np.asarray(lb, float), slo])
        self.ub = np.concatenate([np.asarray(ub, float), sup])
        if np.any(self.lb > self.ub + PRIMAL_TOL):
            self.status = INFEASIBLE
            return
        self.status = None
        self.max_iter = max_iter or 50 * (m + n) + 1000
        self.iterations = 0

        x = np.zeros(n + m)
        for j in range(n):
            lo, up = self.lb[j], self.ub[j]
            x[j] = lo if math.isfinite(lo) else (up if math.isfinite(up) else 0.0)
        resid = self.b - A @ x[:n]
        art_rows = [i for i in range(m)
                    if not (self.lb[n + i] - PRIMAL_TOL <= resid[i] <= self.ub[n + i] + PRIMAL_TOL)]
        k = len(art_rows)
        self.n_art = k
        full = np.zeros((m, n + m + k))
        full[:, :n] = A
        full[:, n:n + m] = np.eye(m)
        basis = list(range(n, n + m))
        for a, i in enumerate(art_rows):
            sgn = 1.0 if resid[i] >= 0 else -1.0
            full[i, n + m + a] = sgn
            basis[i] = n + m + a
        self.full = full
        self.lb = np.concatenate([self.lb, np.zeros(k)])
        self.ub = np.concatenate([self.ub, np.full(k, math.inf)])
        self.x = np.concatenate([x, np.zeros(k)])
        self.basis = np.array(basis, dtype=int)
        self._refactor()

    # -- linear algebra --------------------------------------------------
    def _refactor(self):
        B = self.full[:, self.basis]
        try:
            self.T = np.linalg.solve(B, self.full)
        except np.linalg.LinAlgError as e:
            raise NumericalFailure("singular basis") from e
        nonbasic = np.ones(self.full.shape[1], bool)
        nonbasic[self.basis] = False
        rhs = self.b - self.full[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = np.linalg.solve(B, rhs)
        self._since_refactor = 0

    def _pivot(self, r: int, q: int):
        T = self.T
        T[r] /= T[r, q]
        col = T[:, q].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        self.basis[r] = q
        self._since_refactor += 1

    # -- iterations ------------------------------------------------------
    def _run(self, cost: np.ndarray) -> str:
        basic = np.zeros(len(cost), bool)
        basic[self.basis] = True
        d = cost - cost[self.basis] @ self.T
        degenerate, bland = 0, False
        while True:
            if self.iterations >= self.max_iter:
                return FAILED
            can_up = (self.x < self.ub - PRIMAL_TOL) & ~basic
            can_down = (self.x > self.lb + PRIMAL_TOL) & ~basic
            eligible = (can_up & (d < -DUAL_TOL)) | (can_down & (d > DUAL_TOL))
            cand = np.flatnonzero(eligible)
            if cand.size == 0:
                return OPTIMAL
            q = cand[0] if bland else cand[np.argmax(np.abs(d[cand]))]
            delta = 1.0 if d[q] < 0 else -1.0
            alpha = self.T[:, q]
            rate = -delta * alpha
            xb = self.x[self.basis]
            lbb, ubb = self.lb[self.basis], self.ub[self.basis]
            limits = np.full(self.m, math.inf)
            with np.errstate(divide="ignore", invalid="ignore"):
                dec = (rate < -PIVOT_TOL) & np.isfinite(lbb)
                limits[dec] = (xb[dec] - lbb[dec]) / -rate[dec]
                inc = (rate > PIVOT_TOL) & np.isfinite(ubb)
                limits[inc] = (ubb[inc] - xb[inc]) / rate[inc]
            limits = np.maximum(limits, 0.0)
            t_row = limits.min() if self.m else math.inf
            t_flip = self.ub[q] - self.lb[q]
            self.iterations += 1
            if math.isinf(t_row) and math.isinf(t_flip):
                return UNBOUNDED
            if t_flip <= t_row:
                t = t_flip
                self.x[q] += delta * t
                self.x[self.basis] = xb + rate * t
                degenerate = 0
                continue
            t = t_row
            ties = np.flatnonzero(limits <= t_row + 1e-12)
            if bland:
                r = ties[np.argmin(self.basis[ties])]
            else:
                r = ties[np.argmax(np.abs(alpha[ties]))]
            leaving = self.basis[r]
            self.x[q] += delta * t
            self.x[self.basis] = xb + rate * t
            self.x[leaving] = lbb[r] if rate[r] < 0 else ubb[r]
            self._pivot(r, q)
            basic[leaving], basic[q] = False, True
            d = d - d[q] * self.T[r]
            if self._since_refactor >= REFACTOR_EVERY:
                self._refactor()
                d = cost - cost[self.basis] @ self.T
            if t <= 1e-12:
                degenerate += 1
                if degenerate >= DEGENERATE_RUN:
                    bland = True
            else:
                degenerate = 0

    def phase1(self) -> str:
        if self.status is not None:
            return self.status
        try:
            if self.n_art:
                cost = np.zeros(len(self.x))
                cost[self.n + self.m:] = 1.0
                st = self._run(cost)
                if st == FAILED:
                    self.status = FAILED
                    return FAILED
                self._refactor()
                art = self.x[self.n + self.m:]
                if art.sum() > FEAS_TOL * max(1.0, np.abs(self.b).max(initial=0.0)) or st != OPTIMAL:
                    self.status = INFEASIBLE
                    return INFEASIBLE
                self._drive_out_artificials()
            self.status = "feasible"
        except NumericalFailure:
            self.status = FAILED
        return self.status

    def _drive_out_artificials(self):
        first_art = self.n + self.m
        self.x[first_art:] = 0.0
        self.ub[first_art:] = 0.0
        for r in range(self.m):
            if self.basis[r] < first_art:
                continue
            row = np.abs(self.T[r, :first_art])
            row[self.basis[self.basis < first_art]] = 0.0
            j = int(np.argmax(row)) if row.size else -1
            if j >= 0 and row[j] > 1e-7:
                self._pivot(r, j)
        self._refactor()

    def optimize(self, c) -> str:
        """Minimise ``c @ x[:n]`` from the current feasible basis."""
        if self.status in (INFEASIBLE, FAILED, None):
            st = self.phase1() if self.status is None else self.status
            if st in (INFEASIBLE, FAILED):
                return st
        cost = np.zeros(len(self.x))
        cost[:self.n] = c
        try:
            st = self._run(cost)
            self._refactor()
        except NumericalFailure:
            return FAILED
        if st == OPTIMAL and not self._primal_ok():
            return FAILED
        return st

    def _primal_ok(self) -> bool:
        xs = self.x[:self.n + self.m]
        if np.any(xs < self.lb[:self.n + self.m] - 1e-7) or np.any(xs > self.ub[:self.n + self.m] + 1e-7):
            return False
        resid = self.full @ self.x - self.b
        return bool(np.all(np.abs(resid) <= 1e-7 * max(1.0, np.abs(self.b).max(initial=0.0))))

    @property
    def solution(self) -> np.ndarray:
        return self.x[:self.n].copy()


@dataclass
class LpSolution:
    status: str
    objective: float = math.nan
    values: dict = field(default_factory=dict)
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def solve_arrays(c, A, senses, b, lb, ub):
    """Return (status, x, objective, iterations) for the array form."""
    c = np.asarray(c, float)
    if len(c) == 0:
        raise ValueError("LP has no variables")
    sx = Simplex(A, senses, b, lb, ub)
    st = sx.optimize(c) if sx.status is None else sx.status
    if st == "feasible":
        st = OPTIMAL
    if st != OPTIMAL:
        return st, None, math.nan, getattr(sx, "iterations", 0)
    x = sx.solution
    return OPTIMAL, x, float(c @ x), sx.iterations


def solve_lp(model: MilpModel, extra_rows: Sequence[Constraint] = ()) -> LpSolution:
    """Solve the model's continuous relaxation (integrality ignored)."""
    c, A, senses, b, lb, ub = model.arrays
    if extra_rows:
        from .model import rows_to_arrays
        _, A2, s2, b2, _, _ = rows_to_arrays(extra_rows, model.variables, {}, model.lower,
                                             model.upper)
        A, senses, b = np.vstack([A, A2]), list(senses) + s2, np.concatenate([b, b2])
    st, x, obj, it = solve_arrays(c, A, senses, b, lb, ub)
    if st != OPTIMAL:
        return LpSolution(st, iterations=it)
    return LpSolution(st, obj, dict(zip(model.variables, x.tolist())), it)


def check_point_feasible(model: MilpModel, point: Mapping[VariableRef, float],
                         tol: float = FEAS_TOL, extra_rows: Sequence[Constraint] = ()):
    """Return (feasible, violated) where violated lists (name, amount) pairs."""
    missing = [v.name for v in model.variables if v not in point]
    if missing:
        raise ValueError(f"point is missing variables: {', '.join(missing)}")
    violated = []
    for v in model.variables:
        x = point[v]
        if x < model.lower[v] - tol or x > model.upper[v] + tol:
            violated.append((f"bound:{v.name}", max(model.lower[v] - x, x - model.upper[v])))
    for n, row in enumerate(list(model.constraints) + list(extra_rows)):
        amount = row.violation(point)
        if amount > tol:
            violated.append((row.name or f"r{n}", amount))
    return not violated, violated
