"""Brute-force reference solvers used only by the test-suite.

Nothing here imports from ``mixplan.milp`` internals or ``mixplan.scheduler``:
the LP oracle is a textbook dense tableau simplex with bounds written out as
rows, and the assignment oracle enumerates integer quantities.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import TooLarge

MAX_DISCRETE = 12
MAX_VALUES = 4
EPS = 1e-9


@dataclass
class OracleResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    objective: float = math.nan
    values: dict | None = None


def dense_simplex(c, rows, senses, rhs, lower, upper):
    """Maximize c.x over {rows x (sense) rhs, lower <= x <= upper}.

    Two-phase tableau method with Bland's rule throughout. Returns
    (status, x, objective).
    """
    c = np.asarray(c, float)
    n = c.size
    A = np.asarray(rows, float).reshape(-1, n) if len(rows) else np.zeros((0, n))
    # substitute x = shift + sign * x' (+ split for free variables) so x' >= 0
    cols = []  # (orig index, sign)
    shift = np.zeros(n)
    extra_rows, extra_senses, extra_rhs = [], [], []
    for j in range(n):
        lo, hi = lower[j], upper[j]
        if math.isfinite(lo):
            shift[j] = lo
            cols.append((j, 1.0))
            if math.isfinite(hi):
                extra_rows.append((len(cols) - 1, 1.0))
                extra_rhs.append(hi - lo)
        elif math.isfinite(hi):
            shift[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    k = len(cols)
    T_rows, T_sense, T_rhs = [], [], []
    for i in range(A.shape[0]):
        row = np.zeros(k)
        for p, (j, s) in enumerate(cols):
            row[p] = A[i, j] * s
        T_rows.append(row)
        T_sense.append(senses[i])
        T_rhs.append(rhs[i] - A[i] @ shift)
    for p, bound in zip(extra_rows, extra_rhs):
        row = np.zeros(k)
        row[p[0]] = 1.0
        T_rows.append(row)
        T_sense.append("<=")
        T_rhs.append(bound)
    cost = np.array([c[j] * s for j, s in cols])
    const = float(c @ shift)

    status, xp = _tableau_max(cost, T_rows, T_sense, T_rhs, k)
    if status != "optimal":
        return status, None, math.nan
    x = shift.copy()
    for p, (j, s) in enumerate(cols):
        x[j] += s * xp[p]
    return "optimal", x, float(cost @ xp) + const


def _tableau_max(cost, rows, senses, rhs, k):
    m = len(rows)
    # normalize to rhs >= 0
    norm_rows, norm_senses, norm_rhs = [], [], []
    for row, s, b in zip(rows, senses, rhs):
        s = getattr(s, "value", s)
        if b < 0:
            row, b = -row, -b
            s = {"<=": ">=", ">=": "<=", "=": "="}[s]
        norm_rows.append(row)
        norm_senses.append(s)
        norm_rhs.append(b)
    n_slack = sum(1 for s in norm_senses if s != "=")
    n_art = sum(1 for s in norm_senses if s != "<=")
    width = k + n_slack + n_art
    T = np.zeros((m, width + 1))
    basis = []
    si, ai = k, k + n_slack
    art_cols = []
    for i in range(m):
        T[i, :k] = norm_rows[i]
        T[i, -1] = norm_rhs[i]
        s = norm_senses[i]
        if s == "<=":
            T[i, si] = 1.0
            basis.append(si)
            si += 1
        elif s == ">=":
            T[i, si] = -1.0
            si += 1
            T[i, ai] = 1.0
            basis.append(ai)
            art_cols.append(ai)
            ai += 1
        else:
            T[i, ai] = 1.0
            basis.append(ai)
            art_cols.append(ai)
            ai += 1
    if art_cols:
        phase1 = np.zeros(width)
        phase1[art_cols] = -1.0
        status = _run(T, basis, phase1, allowed=np.ones(width, bool))
        value = sum(T[i, -1] for i, b in enumerate(basis) if b in art_cols)
        if value > 1e-7 * (1.0 + max(norm_rhs, default=0.0)):
            return "infeasible", None
        # pivot degenerate artificials out where possible
        for i, b in enumerate(basis):
            if b in art_cols:
                for j in range(k + n_slack):
                    if abs(T[i, j]) > 1e-9:
                        _pivot(T, basis, i, j)
                        break
    allowed = np.ones(width, bool)
    allowed[art_cols] = False
    full_cost = np.zeros(width)
    full_cost[:k] = cost
    status = _run(T, basis, full_cost, allowed)
    if status == "unbounded":
        return "unbounded", None
    x = np.zeros(width)
    for i, b in enumerate(basis):
        x[b] = T[i, -1]
    return "optimal", x[:k]


def _pivot(T, basis, r, j):
    T[r] /= T[r, j]
    for i in range(T.shape[0]):
        if i != r and T[i, j] != 0.0:
            T[i] -= T[i, j] * T[r]
    basis[r] = j


def _run(T, basis, cost, allowed):
    m = T.shape[0]
    for _ in range(10_000):
        cb = np.array([cost[b] for b in basis]) if m else np.zeros(0)
        reduced = cost - (cb @ T[:, :-1] if m else 0.0)
        entering = -1
        for j in range(len(cost)):
            if allowed[j] and j not in basis and reduced[j] > EPS:
                entering = j
                break
        if entering < 0:
            return "optimal"
        best, leave = math.inf, -1
        for i in range(m):
            a = T[i, entering]
            if a > EPS:
                ratio = T[i, -1] / a
                if ratio < best - 1e-12 or (abs(ratio - best) <= 1e-12 and basis[i] < basis[leave]):
                    best, leave = ratio, i
        if leave < 0:
            return "unbounded"
        _pivot(T, basis, leave, entering)
    raise RuntimeError("dense simplex did not terminate")


def _model_data(model):
    """Read a MilpModel through its public attributes only."""
    ids = [v.id for v in model.variables]
    index = {vid: i for i, vid in enumerate(ids)}
    rows, senses, rhs = [], [], []
    for con in model.constraints:
        row = np.zeros(len(ids))
        for vid, a in con.coeffs.items():
            row[index[vid]] = a
        rows.append(row)
        senses.append(getattr(con.sense, "value", con.sense))
        rhs.append(con.rhs)
    lower = [v.lower for v in model.variables]
    upper = [v.upper for v in model.variables]
    cost = [v.objective for v in model.variables]
    discrete = [getattr(v.kind, "value", v.kind) != "continuous" for v in model.variables]
    return ids, rows, senses, rhs, lower, upper, cost, discrete


def enumerate_milp(model) -> OracleResult:
    """Best objective over every assignment of the discrete variables."""
    ids, rows, senses, rhs, lower, upper, cost, discrete = _model_data(model)
    disc = [j for j, flag in enumerate(discrete) if flag]
    cont = [j for j, flag in enumerate(discrete) if not flag]
    if len(disc) > MAX_DISCRETE:
        raise TooLarge(f"{len(disc)} discrete variables exceed the cap of {MAX_DISCRETE}")
    domains = []
    for j in disc:
        lo, hi = math.ceil(lower[j] - 1e-9), math.floor(upper[j] + 1e-9)
        if not (math.isfinite(lo) and math.isfinite(hi)) or hi - lo + 1 > MAX_VALUES:
            raise TooLarge(f"variable {ids[j]!r} has more than {MAX_VALUES} integer values")
        domains.append(range(lo, hi + 1))
    A = np.array(rows, float).reshape(len(rows), len(ids))
    b = np.array(rhs, float)
    c = np.array(cost, float)
    best = OracleResult("infeasible")
    for combo in itertools.product(*domains):
        fixed = np.zeros(len(ids))
        fixed[disc] = combo
        if cont:
            sub_rows = A[:, cont]
            sub_rhs = b - A[:, disc] @ np.array(combo, float) if disc else b
            status, xc, obj = dense_simplex(c[cont], list(sub_rows), senses, list(sub_rhs),
                                            [lower[j] for j in cont], [upper[j] for j in cont])
            if status == "unbounded":
                return OracleResult("unbounded")
            if status != "optimal":
                continue
            fixed[cont] = xc
            total = obj + float(c[disc] @ np.array(combo, float)) if disc else obj
        else:
            lhs = A @ fixed
            ok = all(_holds(lhs[i], s, b[i]) for i, s in enumerate(senses))
            if not ok:
                continue
            total = float(c @ fixed)
        if best.status != "optimal" or total > best.objective + 1e-12:
            best = OracleResult("optimal", total, dict(zip(ids, fixed.tolist())))
    return best


def _holds(lhs, sense, rhs, tol=1e-9):
    if sense == "<=":
        return lhs <= rhs + tol
    if sense == ">=":
        return lhs >= rhs - tol
    return abs(lhs - rhs) <= tol


@dataclass(frozen=True)
class MicroOrder:
    id: str
    product: str
    quantity: int


@dataclass(frozen=True)
class MicroMachine:
    id: str
    capacity_hours: float
    unit_times: Mapping[str, float]  # product -> hours/unit for products the mounted mold supports
    planned: Mapping[str, float]  # product -> residual planned production y


def best_day_assignment(orders: Sequence[MicroOrder], machines: Sequence[MicroMachine]) -> int:
    """Maximum whole units placeable on one day under production, capacity and mold limits.

    Units of the same product are interchangeable for the count, so the
    search enumerates per-product quantities on the first machine and fills
    the second machine cheapest-time-first, which is exact for a single
    capacity row with per-product caps.
    """
    if len(orders) > 3 or len(machines) > 2:
        raise TooLarge("best_day_assignment handles at most 3 orders and 2 machines")
    if any(o.quantity > 100 for o in orders):
        raise TooLarge("order quantities above 100 are out of range")
    demand: dict[str, int] = {}
    for o in orders:
        demand[o.product] = demand.get(o.product, 0) + int(o.quantity)
    products = sorted(demand)
    machines = list(machines) + [MicroMachine("_none", 0.0, {}, {})] * (2 - len(machines))

    def cap(m: MicroMachine, f: str) -> int:
        if f not in m.unit_times:
            return 0
        t = m.unit_times[f]
        return int(min(math.floor(m.planned.get(f, 0.0) + 1e-9), math.floor(m.capacity_hours / t + 1e-9)))

    m1, m2 = machines
    ranges = [range(0, min(demand[f], cap(m1, f)) + 1) for f in products]
    best = 0
    for combo in itertools.product(*ranges):
        used = sum(q * m1.unit_times[f] for q, f in zip(combo, products) if q)
        if used > m1.capacity_hours + 1e-9:
            continue
        left = m2.capacity_hours
        total = sum(combo)
        order = sorted((m2.unit_times[f], f) for f in products if f in m2.unit_times)
        for t, f in order:
            room = min(demand[f] - combo[products.index(f)], cap(m2, f), math.floor(left / t + 1e-9))
            room = max(room, 0)
            total += room
            left -= room * t
        best = max(best, total)
    return best
