"""Branch-and-bound over the bounded simplex.

Node order is best-bound (ties by creation order). Until the first integer
point exists the search plunges depth-first toward the nearer rounding of
the branching variable, which is what gives large planning models an
incumbent at all. The branching variable is the most fractional one, lowest
index on ties. Every node re-optimizes with the dual simplex from whatever
basis the solver currently holds: bound changes never break dual
feasibility, so no per-node basis needs storing.
"""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from ..errors import NoIncumbentAtLimit
from .model import MilpLimits, MilpModel, MilpSolution, Status
from .simplex import BoundedSimplex

log = logging.getLogger(__name__)


@dataclass(order=True)
class _Node:
    key: float  # -bound, so the heap pops the best bound first
    seq: int
    depth: int
    changes: tuple  # ((var index, lower, upper), ...) relative to the root
    warm: tuple | None = field(default=None, compare=False)  # parent basis


def _values(model: MilpModel, x: np.ndarray) -> dict[str, float]:
    return {v.id: float(x[i]) for i, v in enumerate(model.variables)}


def solve_lp(model: MilpModel, *, kernels=None) -> MilpSolution:
    """LP relaxation: integrality is ignored."""
    A, senses, rhs, lo, hi, c, _ = model.arrays()
    lp = BoundedSimplex(A, senses, rhs, lo, hi, c, kernels=kernels)
    res = lp.solve()
    if res.status != "optimal":
        return MilpSolution(Status(res.status), iterations=lp.iterations)
    x = _clean(res.x)
    return MilpSolution(Status.OPTIMAL, _values(model, x), float(c @ x), 0.0, 0, lp.iterations)


def _clean(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    x[np.abs(x) < 1e-12] = 0.0
    return x


def _lex_smaller(a: np.ndarray, b: np.ndarray) -> bool:
    diff = np.flatnonzero(a != b)
    return bool(diff.size) and a[diff[0]] < b[diff[0]]


def solve_milp(model: MilpModel, limits: MilpLimits | None = None, *,
               incumbent: Mapping[str, float] | None = None,
               dive: Callable[[dict[str, float]], Mapping[str, float]] | None = None,
               neighbors: Callable[[dict[str, float]], Iterable[Mapping[str, float]]] | None = None,
               starts: Iterable[Mapping[str, float]] = (),
               kernels=None) -> MilpSolution:
    """Maximize ``model`` exactly, or until ``limits`` stop the search.

    ``incumbent`` is an optional known-feasible assignment; it is checked and
    used as the starting lower bound. ``dive`` is a primal heuristic: it is
    called with the current relaxed solution and returns values to fix for
    some discrete variables; the LP is re-solved and the callback asked
    again until it returns nothing. An integral end point becomes a
    candidate incumbent. Each of ``starts`` fixes some discrete variables
    outright; an integral LP optimum under those fixings is a candidate too.
    ``neighbors`` is a local search: given the incumbent it yields
    alternative fixings, each tried by re-solving the LP and, when that
    leaves fractions, finishing with ``dive``. The first improving one
    becomes the incumbent and the search restarts from it, for at most
    ``limits.max_moves`` LP re-solves in all.
    """
    limits = limits or MilpLimits()
    A, senses, rhs, lo0, hi0, c, discrete = model.arrays()
    disc = np.flatnonzero(discrete)
    lo0 = lo0.copy()
    hi0 = hi0.copy()
    lo0[disc] = np.ceil(lo0[disc] - limits.integrality_tol)
    hi0[disc] = np.floor(hi0[disc] + limits.integrality_tol)
    if np.any(lo0 > hi0):
        return MilpSolution(Status.INFEASIBLE)
    if disc.size == 0:
        return solve_lp(model, kernels=kernels)

    started = time.monotonic()
    lp = BoundedSimplex(A, senses, rhs, lo0, hi0, c, kernels=kernels)
    root = lp.solve()
    if root.status == "infeasible":
        return MilpSolution(Status.INFEASIBLE, nodes_explored=1, iterations=lp.iterations)
    if root.status == "unbounded":
        return MilpSolution(Status.UNBOUNDED, nodes_explored=1, iterations=lp.iterations)

    best_x: np.ndarray | None = None
    best_obj = -math.inf
    if incumbent is not None:
        cand = np.array([float(incumbent.get(v.id, 0.0)) for v in model.variables])
        if _is_feasible(A, senses, rhs, lo0, hi0, cand, disc, limits):
            best_x, best_obj = cand, float(c @ cand)

    def prune_level() -> float:
        return best_obj + limits.gap_tol * max(1.0, abs(best_obj))

    def offer(x: np.ndarray, obj: float):
        nonlocal best_x, best_obj
        tie = 1e-9 * (1.0 + abs(best_obj)) if best_x is not None else 0.0
        if best_x is None or obj > best_obj + tie or (abs(obj - best_obj) <= tie and _lex_smaller(x, best_x)):
            best_x, best_obj = x, obj

    deadline = started + limits.time_limit
    if dive is not None:
        _guided_dive(model, lp, dive, root, lo0, hi0, c, disc, limits, offer, deadline)
        log.debug("guided dive: incumbent %.6g", best_obj)
    for fixes in starts:
        _try_fixings(model, lp, fixes, lo0, hi0, c, disc, limits, offer)
    if neighbors is not None and best_x is not None:
        best_x, best_obj = _local_search(model, lp, neighbors, best_x, best_obj, lo0, hi0, c,
                                         disc, limits, dive, deadline)
        log.debug("local search: incumbent %.6g", best_obj)

    heap: list[_Node] = []
    seq = 0
    nodes = 0
    current: _Node | None = _Node(-root.objective, 0, 0, ())
    current_res = root
    hit_limit = False
    pruned_bound = -math.inf

    while True:
        if current is None:
            if best_x is not None and heap and -heap[0].key <= prune_level():
                pruned_bound = max(pruned_bound, -heap[0].key)
                heap.clear()
            if not heap:
                break
            current = heapq.heappop(heap)
            current_res = None
        if nodes >= limits.max_nodes or time.monotonic() - started > limits.time_limit:
            heapq.heappush(heap, current)
            hit_limit = True
            break
        if current_res is None:
            if current.warm is not None:
                lp.restore(current.warm)
            lo, hi = lo0.copy(), hi0.copy()
            for j, l, h in current.changes:
                lo[j], hi[j] = l, h
            current_res = lp.resolve(lo, hi)
        nodes += 1
        res, node = current_res, current
        current, current_res = None, None
        if res.status != "optimal":
            continue
        if best_x is not None and res.objective <= prune_level():
            pruned_bound = max(pruned_bound, res.objective)
            continue
        x = res.x
        frac = np.abs(x[disc] - np.round(x[disc]))
        fractional = frac > limits.integrality_tol
        if not fractional.any():
            polished = _polish(lp, c, lo0, hi0, node.changes, x, disc)
            offer(*polished)
            continue
        dist = np.minimum(x[disc] - np.floor(x[disc]), np.ceil(x[disc]) - x[disc])
        k = int(np.argmax(np.where(fractional, dist, -1.0)))
        j = int(disc[k])
        v = x[j]
        down = node.changes + ((j, _bound_of(node.changes, j, lo0, hi0)[0], math.floor(v)),)
        up = node.changes + ((j, math.ceil(v), _bound_of(node.changes, j, lo0, hi0)[1]),)
        children = []
        warm = lp.snapshot()
        for changes in (down, up):
            seq += 1
            children.append(_Node(-res.objective, seq, node.depth + 1, changes, warm))
        if best_x is None:
            prefer_up = v - math.floor(v) >= 0.5
            dive, other = (children[1], children[0]) if prefer_up else (children[0], children[1])
            heapq.heappush(heap, other)
            current = dive
        else:
            for ch in children:
                heapq.heappush(heap, ch)

    if best_x is None:
        if hit_limit:
            raise NoIncumbentAtLimit(
                f"no integer-feasible point after {nodes} nodes / {time.monotonic() - started:.1f}s")
        return MilpSolution(Status.INFEASIBLE, nodes_explored=nodes, iterations=lp.iterations)

    bound = max([-n.key for n in heap] + [pruned_bound, best_obj])
    gap = (bound - best_obj) / max(1.0, abs(best_obj))
    status = Status.OPTIMAL if (not hit_limit or gap <= limits.gap_tol) else Status.FEASIBLE
    x = _clean(best_x)
    x[disc] = np.round(x[disc])
    return MilpSolution(status, _values(model, x), float(c @ x), float(gap), nodes, lp.iterations)


def _guided_dive(model, lp, dive, root, lo0, hi0, c, disc, limits, offer, deadline=math.inf):
    snap = lp.snapshot()
    lo, hi = lo0.copy(), hi0.copy()
    res = root
    for _ in range(disc.size + 1):
        if time.monotonic() > deadline:
            res = None
            break
        fixes = dive(_values(model, res.x))
        if not fixes:
            break
        for vid, val in fixes.items():
            j = model.index(vid)
            lo[j] = hi[j] = min(max(float(val), lo0[j]), hi0[j])
        res = lp.resolve(lo, hi)
        if res.status != "optimal":
            break
    if res is not None and res.status == "optimal":
        frac = np.abs(res.x[disc] - np.round(res.x[disc]))
        if not (frac > limits.integrality_tol).any():
            changes = tuple((int(j), lo[j], hi[j]) for j in np.flatnonzero((lo != lo0) | (hi != hi0)))
            offer(*_polish(lp, c, lo0, hi0, changes, res.x, disc))
    lp.restore(snap)


def _try_fixings(model, lp, fixes, lo0, hi0, c, disc, limits, offer):
    snap = lp.snapshot()
    lo, hi = lo0.copy(), hi0.copy()
    for vid, val in fixes.items():
        j = model.index(vid)
        lo[j] = hi[j] = min(max(float(val), lo0[j]), hi0[j])
    res = lp.resolve(lo, hi)
    if res.status == "optimal":
        frac = np.abs(res.x[disc] - np.round(res.x[disc]))
        if not (frac > limits.integrality_tol).any():
            changes = tuple((int(j), lo[j], hi[j]) for j in np.flatnonzero((lo != lo0) | (hi != hi0)))
            offer(*_polish(lp, c, lo0, hi0, changes, res.x, disc))
    lp.restore(snap)


def _local_search(model, lp, neighbors, best_x, best_obj, lo0, hi0, c, disc, limits, dive=None,
                  deadline=math.inf):
    snap = lp.snapshot()
    trials = 0
    improved = True
    while improved and trials < limits.max_moves:
        improved = False
        for fixes in neighbors(_values(model, best_x)):
            if trials >= limits.max_moves or time.monotonic() > deadline:
                break
            trials += 1
            lo, hi = lo0.copy(), hi0.copy()
            for vid, val in fixes.items():
                j = model.index(vid)
                lo[j] = hi[j] = min(max(float(val), lo0[j]), hi0[j])
            res = lp.resolve(lo, hi)
            frac = np.abs(res.x[disc] - np.round(res.x[disc])) if res.status == "optimal" else None
            while dive is not None and frac is not None and (frac > limits.integrality_tol).any():
                if res.objective <= best_obj + 1e-9 * (1.0 + abs(best_obj)):
                    break
                more = dive(_values(model, res.x)) if trials < limits.max_moves else None
                if not more:
                    break
                trials += 1
                for vid, val in more.items():
                    j = model.index(vid)
                    lo[j] = hi[j] = min(max(float(val), lo0[j]), hi0[j])
                res = lp.resolve(lo, hi)
                frac = np.abs(res.x[disc] - np.round(res.x[disc])) if res.status == "optimal" else None
            if frac is None or (frac > limits.integrality_tol).any():
                continue
            if res.objective <= best_obj + 1e-9 * (1.0 + abs(best_obj)):
                continue
            changes = tuple((int(j), lo[j], hi[j]) for j in np.flatnonzero((lo != lo0) | (hi != hi0)))
            x, obj = _polish(lp, c, lo0, hi0, changes, res.x, disc)
            if obj > best_obj:
                best_x, best_obj = x, obj
                improved = True
                break
    log.debug("local search: %d trials", trials)
    lp.restore(snap)
    return best_x, best_obj


def _bound_of(changes, j, lo0, hi0):
    lo, hi = lo0[j], hi0[j]
    for jj, l, h in changes:
        if jj == j:
            lo, hi = l, h
    return lo, hi


def _polish(lp: BoundedSimplex, c, lo0, hi0, changes, x, disc):
    """Fix the integer part at its rounded values and re-solve the continuous rest."""
    lo, hi = lo0.copy(), hi0.copy()
    for j, l, h in changes:
        lo[j], hi[j] = l, h
    fixed = np.round(x[disc])
    lo[disc] = fixed
    hi[disc] = fixed
    res = lp.resolve(lo, hi)
    if res.status == "optimal":
        out = res.x.copy()
        out[disc] = fixed
        return out, float(c @ out)
    out = x.copy()
    out[disc] = fixed
    return out, float(c @ out)


def _is_feasible(A, senses, rhs, lo, hi, x, disc, limits) -> bool:
    if np.any(x < lo - limits.feasibility_tol) or np.any(x > hi + limits.feasibility_tol):
        return False
    if np.any(np.abs(x[disc] - np.round(x[disc])) > limits.integrality_tol):
        return False
    lhs = A @ x
    for i, s in enumerate(senses):
        if s.value == "<=" and lhs[i] > rhs[i] + limits.feasibility_tol:
            return False
        if s.value == ">=" and lhs[i] < rhs[i] - limits.feasibility_tol:
            return False
        if s.value == "=" and abs(lhs[i] - rhs[i]) > limits.feasibility_tol:
            return False
    return True
