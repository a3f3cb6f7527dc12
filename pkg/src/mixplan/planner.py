"""Mid-term planning model and the rolling-horizon loop.

A window model decides, per machine and day, which molds are mounted and
how much of each product to make, how much of each order to ship on each
day, how many accessories to machine ahead of need, and which residual
demand to outsource. Unmet demand is priced by the order's delay penalty
through an explicit shortfall variable instead of being forbidden.

Scheme A plans on one pseudo-machine per molding group (pooled hours, no
mold variables); see :func:`planning_scenario`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .domain import (Machine, Mold, Product, Scenario, Scheme, SchemeConfig, order_molds,
                     unit_time)
from .errors import EmptyWindow, InconsistentState, SolverFailure
from .milp import MilpLimits, MilpModel, Sense, Status, VarKind, solve_lp, solve_milp

log = logging.getLogger(__name__)

POOL_SUFFIX = "-POOL"
EPS = 1e-9


@dataclass(frozen=True)
class PlanEnvelope:
    """Frozen part of one window's plan. Keys are plain tuples of ids and days."""

    window: tuple[int, int]
    y: Mapping[tuple[str, str, int], float]
    q: Mapping[tuple[str, int], float]
    x: Mapping[tuple[str, int], tuple[str, ...]]
    p: Mapping[tuple[str, int], float]
    inventory: Mapping[tuple[str, int], float]
    outsourced: Mapping[str, float]
    objective: float
    shortfall: Mapping[str, float] = field(default_factory=dict)
    status: str = "optimal"
    gap: float = 0.0

    def covers(self, day: int) -> bool:
        return self.window[0] <= day <= self.window[1]

    @property
    def days(self) -> range:
        return range(self.window[0], self.window[1] + 1)


@dataclass(frozen=True)
class RollingState:
    carried_inventory: Mapping[str, float] = field(default_factory=dict)
    fulfilled_so_far: Mapping[str, float] = field(default_factory=dict)
    committed_outsourcing: Mapping[str, float] = field(default_factory=dict)
    last_mold: Mapping[str, str | None] = field(default_factory=dict)

    @classmethod
    def initial(cls, scenario: Scenario) -> "RollingState":
        return cls(
            carried_inventory={f.id: float(scenario.initial_accessory_inventory.get(f.id, 0.0))
                               for f in scenario.products if f.accessory_per_unit > 0},
            fulfilled_so_far={},
            committed_outsourcing={},
            last_mold={m.id: m.initial_mold for m in scenario.molding_machines},
        )

    def residual(self, order) -> float:
        return max(0.0, order.quantity - self.fulfilled_so_far.get(order.id, 0.0)
                   - self.committed_outsourcing.get(order.id, 0.0))

    def check(self, scenario: Scenario) -> None:
        problems = []
        products = {f.id for f in scenario.products}
        machines = {m.id for m in scenario.machines}
        for f, v in self.carried_inventory.items():
            if f not in products:
                problems.append(f"carried inventory for unknown product {f!r}")
            elif not v >= -1e-9:
                problems.append(f"carried inventory of {f!r} is negative ({v})")
        for name, mapping in (("fulfilled", self.fulfilled_so_far),
                              ("outsourced", self.committed_outsourcing)):
            for o, v in mapping.items():
                try:
                    order = scenario.order(o)
                except KeyError:
                    problems.append(f"{name} quantity for unknown order {o!r}")
                    continue
                if not v >= -1e-9:
                    problems.append(f"{name} quantity of {o!r} is negative ({v})")
                elif v > order.quantity + 1e-6:
                    problems.append(f"{name} quantity of {o!r} exceeds its order ({v} > {order.quantity})")
        for m, k in self.last_mold.items():
            if m not in machines:
                problems.append(f"mold state for unknown machine {m!r}")
            elif k is not None:
                try:
                    mold = scenario.mold(k)
                except KeyError:
                    problems.append(f"machine {m!r} holds unknown mold {k!r}")
                    continue
                if m not in mold.compatible_machines:
                    problems.append(f"machine {m!r} cannot hold mold {k!r}")
        if problems:
            raise InconsistentState("; ".join(problems))


def planning_scenario(scenario: Scenario, scheme: Scheme | str) -> Scenario:
    """The scenario whose machines the plan refers to.

    Scheme A replaces every molding group with one pseudo-machine that pools
    the group's hours and has no changeover time. Other schemes plan on the
    real machines.
    """
    scheme = scheme if isinstance(scheme, Scheme) else Scheme.parse(scheme)
    if scheme is not Scheme.A:
        return scenario
    molding = {m.id for m in scenario.molding_machines}
    groups: dict[str, list[Machine]] = {}
    for m in scenario.machines:
        if m.id in molding:
            groups.setdefault(m.group, []).append(m)
    pool_of = {}
    machines = []
    for g, members in groups.items():
        pid = g + POOL_SUFFIX
        machines.append(Machine(pid, g, sum(m.unit_time_default for m in members) / len(members),
                                sum(m.day_hours for m in members), 0.0, None))
        for m in members:
            pool_of[m.id] = pid
    machines += [m for m in scenario.machines if m.id not in molding]
    molds = [Mold(k.id, frozenset(pool_of[m] for m in k.compatible_machines if m in pool_of),
                  k.producible_products) for k in scenario.molds]
    products = []
    for f in scenario.products:
        members = [m for m in scenario.machines_for(f.id) if m.id in pool_of]
        overrides = {}
        for pid in sorted({pool_of[m.id] for m in members}):
            times = [unit_time(m, f) for m in members if pool_of[m.id] == pid]
            overrides[pid] = sum(times) / len(times)
        products.append(replace(f, unit_time_overrides=overrides))
    return Scenario(scenario.horizon_days, machines, molds, products, scenario.orders,
                    scenario.accessory_capacity_per_day, scenario.labor_rates,
                    scenario.material_lead_days, scenario.initial_accessory_inventory,
                    scenario.accessory_cost_ratio)


@dataclass
class PlanningModel:
    """A window MILP together with the maps from decisions to variable ids."""

    model: MilpModel
    scenario: Scenario  # the planning scenario (pooled for scheme A)
    config: SchemeConfig
    window: tuple[int, int]
    frozen_end: int
    state: RollingState
    residual: dict[str, float]
    committed: list[str]  # orders whose outsourcing/shortfall is final after this window
    y: dict = field(default_factory=dict)
    q: dict = field(default_factory=dict)
    x: dict = field(default_factory=dict)
    delta: dict = field(default_factory=dict)
    p: dict = field(default_factory=dict)
    inventory: dict = field(default_factory=dict)
    u: dict = field(default_factory=dict)
    s: dict = field(default_factory=dict)

    def trivial_solution(self) -> dict[str, float]:
        """Produce nothing; outsource wherever that beats paying the shortfall."""
        vals = {vid: 0.0 for vid in (v.id for v in self.model.variables)}
        for (f, d), vid in self.inventory.items():
            vals[vid] = self.state.carried_inventory.get(f, 0.0)
        for o, vid in self.s.items():
            order = self.scenario.order(o)
            if order.unit_revenue - order.unit_outsourcing_cost >= -order.unit_delay_penalty:
                vals[self.u[o]] = self.residual[o]
            else:
                vals[vid] = self.residual[o]
        return vals

    def next_day_fixings(self, values: Mapping[str, float]) -> dict[str, float]:
        """Dive step: commit mold runs for the earliest days still fractional.

        Scheme C plans each machine's mold sequence over the rest of the
        window on the relaxed values, charging every swap part of its lost
        share of a day, and commits the first ``DIVE_BLOCK`` days of it.
        Scheme B mounts the strongest molds of the earliest fractional day.
        """
        by_day: dict[int, dict[str, list[tuple[float, str, str]]]] = {}
        for (m, k, d), vid in self.x.items():
            by_day.setdefault(d, {}).setdefault(m, []).append((values.get(vid, 0.0), k, vid))
        start = None
        for d in sorted(by_day):
            if any(min(v, 1.0 - v) > 1e-6 for ranked in by_day[d].values() for v, _, _ in ranked):
                start = d
                break
        if start is None:
            return {}
        fix: dict[str, float] = {}
        if self.config.scheme is Scheme.B:
            limit = self.config.max_molds_per_day
            for m, ranked in sorted(by_day[start].items()):
                ranked = sorted(ranked, key=lambda t: (-t[0], t[1]))
                for rank, (val, _k, vid) in enumerate(ranked):
                    fix[vid] = 1.0 if rank < limit and val > 1e-6 else 0.0
            return fix
        days = [d for d in sorted(by_day) if d >= start]
        block = set(days[:DIVE_BLOCK])
        for m in sorted({m for ms in by_day.values() for m in ms}):
            machine = self.scenario.machine(m)
            path = _mold_runs(m, days, by_day, self.state.last_mold.get(m) if start == self.window[0]
                              else _held_mold(m, start - 1, by_day),
                              machine.mold_change_hours / machine.day_hours * SWAP_WEIGHT)
            for d in days:
                if d not in block:
                    continue
                for _val, k, vid in by_day[d].get(m, ()):
                    fix[vid] = 1.0 if k == path[d] else 0.0
        return fix


    def earliest_due_fixings(self) -> dict[str, float]:
        """A one-mold-per-machine-day plan built day by day, least slack first.

        An order's slack is the number of its shipping days left after today
        minus the days of work it and the mold's earlier-due orders, shippable
        yet or not, still need on their fastest machines. Each day, molds are taken in order
        of their least slack and given a
        free machine, preferring one that already holds the mold and then
        the one able to hold the fewest pending molds. A mold that is still
        behind after its first machine may take another. Idle machines keep
        what they hold. Returns fixings for every mold variable; production
        itself is left to the LP.
        """
        plan = self.scenario
        q_days: dict[str, list[int]] = {}
        for (o, d) in self.q:
            q_days.setdefault(o, []).append(d)
        rem = {o: self.residual[o] for o in q_days}
        holds = {m: self.state.last_mold.get(m) for (m, _k, _d) in self.x}
        known = {f.id for f in plan.products}
        best_rate: dict[str, float] = {}
        for (m, k, _d) in self.x:
            machine = plan.machine(m)
            for fid in plan.mold(k).producible_products:
                if fid in known:
                    r = max(0.0, machine.day_hours - machine.mold_change_hours) / unit_time(
                        machine, plan.product(fid))
                    best_rate[fid] = max(best_rate.get(fid, 0.0), r)

        def slack(orders, d):
            """Least slack over the mold's orders, work of earlier-due orders included."""
            worst, work = math.inf, 0.0
            for o in orders:
                rate = best_rate.get(plan.order(o).product, 0.0)
                work += rem[o] / rate if rate > 0 else math.inf
                worst = min(worst, sum(1 for dd in q_days[o] if dd > d) - work)
            return worst

        fix = {vid: 0.0 for vid in self.x.values()}
        for d in range(self.window[0], self.window[1] + 1):
            pending: dict[str, list[str]] = {}  # mold -> orders it can still serve from today
            for o, days in q_days.items():
                if days[-1] >= d:
                    pending.setdefault(plan.product(plan.order(o).product).mold, []).append(o)
            free = {m for (m, _k, dd) in self.x if dd == d}
            flex = {m: sum(1 for k in pending if (m, k, d) in self.x) for m in free}
            busy: set[str] = set()
            while free:
                picks = []
                for k, orders in pending.items():
                    live = sorted((o for o in orders if rem[o] > EPS),
                                  key=lambda o: (plan.order(o).due_day, o))
                    if not any(d in q_days[o] for o in live) or not any((m, k, d) in self.x
                                                                        for m in free):
                        continue
                    urgent = slack(live, d)
                    if k in busy and urgent >= 0:
                        continue
                    picks.append((k in busy, urgent, plan.order(live[0]).due_day, k, live))
                if not picks:
                    break
                *_rank, k, live = min(picks)
                m = min((m for m in free if (m, k, d) in self.x),
                        key=lambda m: (holds[m] != k, flex[m], m))
                free.discard(m)
                busy.add(k)
                machine = plan.machine(m)
                hours = machine.day_hours - (machine.mold_change_hours if holds[m] != k else 0.0)
                holds[m] = k
                fix[self.x[(m, k, d)]] = 1.0
                for o in (o for o in live if d in q_days[o]):
                    t = unit_time(machine, plan.product(plan.order(o).product))
                    made = min(rem[o], max(0.0, hours) / t)
                    rem[o] -= made
                    hours -= made * t
            for m in free:
                vid = self.x.get((m, holds[m], d))
                if vid is not None:
                    fix[vid] = 1.0
                else:
                    holds[m] = None
        return fix

    def neighbor_moves(self, values: Mapping[str, float]):
        """Local-search moves over the mold plan, most promising first.

        Releases come first: for each order still bought or unmet, every
        mold choice inside its shipping days, padded by ``RELEASE_PADS``
        days, is left open and the rest kept, for the caller to re-plan;
        sliding ``SWEEP_DAYS`` releases over the whole window follow. Repairs then mount the order's mold on the least busy machine-days
        of its window, alone or together with moving the displaced mold to
        the least busy other machine that can hold it that day. Scheme C
        finally tries merges, continuing a neighbouring day's mold to save a
        swap. Repairs and merges keep every other mold choice.
        """
        limit = self.config.max_molds_per_day if self.config.scheme is Scheme.B else 1
        base = {vid: (1.0 if values.get(vid, 0.0) > 0.5 else 0.0) for vid in self.x.values()}
        by_md: dict[tuple[str, int], dict[str, str]] = {}
        for (m, k, d), vid in self.x.items():
            by_md.setdefault((m, d), {})[k] = vid
        mounted = {md: tuple(sorted(k for k, vid in ks.items() if base[vid] > 0.5))
                   for md, ks in by_md.items()}
        used: dict[tuple[str, int], float] = {}
        for (m, f, d), vid in self.y.items():
            t = unit_time(self.scenario.machine(m), self.scenario.product(f))
            used[(m, d)] = used.get((m, d), 0.0) + values.get(vid, 0.0) * t

        def move(*cells):
            fix = dict(base)
            for m, d, molds in cells:
                for k, vid in by_md[(m, d)].items():
                    fix[vid] = 1.0 if k in molds else 0.0
            return fix

        def rehome(m, d, displaced):
            """Cells that take over ``displaced`` molds on other machines the same day."""
            out = []
            for k in displaced:
                spots = sorted((used.get((mm, d), 0.0), mm) for (mm, dd) in by_md
                               if dd == d and mm != m and k in by_md[(mm, d)]
                               and k not in mounted.get((mm, d), ()))
                if spots:
                    out.append((spots[0][1], d, (k,)))
            return out

        short = []
        for o in self.committed:
            gap = values.get(self.u[o], 0.0) + values.get(self.s[o], 0.0)
            if gap > 1e-6:
                short.append((-gap, o))
        tried = set()
        for pad in RELEASE_PADS:
            for _gap, o in sorted(short):
                days = [d for (oo, d) in self.q if oo == o]
                if days:
                    span = range(min(days) - pad, max(days) + pad + 1)
                    yield {vid: base[vid] for (m, k, d), vid in self.x.items() if d not in span}
        if short:
            a, b = self.window
            for start in range(a, b + 1, SWEEP_STEP):
                span = range(start, start + SWEEP_DAYS)
                yield {vid: base[vid] for (m, k, d), vid in self.x.items() if d not in span}
        for gap, o in sorted(short):
            k = self.scenario.product(self.scenario.order(o).product).mold
            slots = sorted((used.get((m, d), 0.0), d, m) for (oo, d) in self.q if oo == o
                           for m in sorted({m for (m, kk, dd) in self.x if kk == k and dd == d}))
            for _hours, d, m in slots:
                current = mounted.get((m, d), ())
                if k in current:
                    continue
                molds = (k,) if limit == 1 else current + (k,)
                if len(molds) > limit or (m, d, molds) in tried:
                    continue
                tried.add((m, d, molds))
                yield move((m, d, molds))
                displaced = [kk for kk in current if kk not in molds]
                if limit == 1 and displaced:
                    extra = rehome(m, d, displaced)
                    if extra:
                        yield move((m, d, molds), *extra)
        if limit != 1:
            return
        for (m, d) in sorted(mounted, key=lambda md: (md[1], md[0])):
            here = mounted[(m, d)]
            for other in (mounted.get((m, d - 1), ()), mounted.get((m, d + 1), ())):
                if here and other and other != here and (m, d, other) not in tried:
                    tried.add((m, d, other))
                    yield move((m, d, other))

DIVE_BLOCK = 1  # days committed per dive step
# Share of a swap's lost day charged in the run planner. Relaxed x values
# already undercount swaps, but the full charge makes runs too sticky.
SWAP_WEIGHT = 0.25
RELEASE_PADS = (1, 3)  # days either side of a short order's window re-planned by a release
SWEEP_DAYS, SWEEP_STEP = 6, 3  # sliding releases tried while any order is still short


def _held_mold(m, day, by_day) -> str | None:
    for val, k, _vid in by_day.get(day, {}).get(m, ()):
        if val > 0.5:
            return k
    return None


def _mold_runs(m, days, by_day, mounted, swap_cost) -> dict[int, str | None]:
    """Best mold per day for one machine: relaxed x values minus swap charges."""
    states = sorted({k for d in days for _v, k, _vid in by_day[d].get(m, ())})
    states = [None] + states
    index = {k: i for i, k in enumerate(states)}
    n = len(states)
    score = np.full(n, -np.inf)
    score[index.get(mounted, 0)] = 0.0
    back = []
    for d in days:
        gain = np.zeros(n)
        allowed = np.zeros(n, dtype=bool)
        allowed[0] = True
        for val, k, _vid in by_day[d].get(m, ()):
            gain[index[k]] = val
            allowed[index[k]] = True
        best_prev = int(np.argmax(score))
        stay = score
        swap = score[best_prev] - swap_cost
        new = np.where(stay >= swap, stay, swap)
        new[0] = score.max()  # going idle costs nothing
        src = np.where(stay >= swap, np.arange(n), best_prev)
        src[0] = best_prev
        new = np.where(allowed, new + gain, -np.inf)
        back.append(src)
        score = new
    path: dict[int, str | None] = {}
    s = int(np.argmax(score))
    for d, src in zip(reversed(days), reversed(back)):
        path[d] = states[s]
        s = int(src[s])
    return path


def _y_id(m, f, d):
    return f"y[{m},{f},{d}]"


def build_planning_model(scenario: Scenario, window, state: RollingState | None,
                         config: SchemeConfig, frozen_end: int | None = None) -> PlanningModel:
    """Window MILP for days ``window[0]..window[1]`` starting from ``state``."""
    a, b = int(window[0]), int(window[1])
    if not 1 <= a <= b <= scenario.horizon_days:
        raise EmptyWindow(f"window [{a}, {b}] is empty or outside 1..{scenario.horizon_days}")
    e = b if frozen_end is None else int(frozen_end)
    if not a <= e <= b:
        raise EmptyWindow(f"frozen end {e} outside window [{a}, {b}]")
    scheme = config.scheme
    plan = planning_scenario(scenario, scheme)
    state = state or RollingState.initial(plan)
    state.check(plan)
    model = MilpModel(f"window-{a}-{b}")
    first_day = max(a, scenario.material_lead_days + 1)
    rbar = scenario.mean_labor_rate

    residual = {}
    q_days: dict[str, list[int]] = {}
    active: dict[tuple[str, int], list[str]] = {}  # (product, day) -> orders shippable that day
    for o in scenario.orders:
        if o.due_day < a or o.release_day > b:
            continue
        res = state.residual(o)
        if res <= EPS:
            continue
        residual[o.id] = res
        days = list(range(max(o.release_day, first_day), min(o.due_day, b) + 1))
        q_days[o.id] = days
        for d in days:
            active.setdefault((o.product, d), []).append(o.id)
    committed = [o for o in residual if scenario.order(o).due_day <= e]
    pm = PlanningModel(model, plan, config, (a, b), e, state, residual, committed)

    products = {f.id: f for f in plan.products}
    machines = plan.molding_machines
    window_days = range(a, b + 1)
    y_by_md: dict[tuple[str, int], list[tuple[str, str]]] = {}
    y_by_fd: dict[tuple[str, int], list[str]] = {}
    x_by_md: dict[tuple[str, int], dict[str, str]] = {}

    def y_cap(m: Machine, f: Product, d: int, t: float) -> float:
        demand = sum(residual[o] for o in active[(f.id, d)])
        return min(f.big_m_cap, m.day_hours / t, demand)

    # machine-day blocks: mold choice, changeover, production
    for d in window_days:
        for m in machines:
            molds = [k for k in plan.molds if m.id in k.compatible_machines]
            runnable = {k.id: [f for f in sorted(k.producible_products)
                               if f in products and (f, d) in active] for k in molds}
            if scheme is not Scheme.A:
                window_molds = [k.id for k in molds
                                if k.id == state.last_mold.get(m.id)
                                or any((f, dd) in active for f in k.producible_products if f in products
                                       for dd in window_days)]
                if not window_molds:
                    continue
                dvid = model.add_var(f"delta[{m.id},{d}]", 0, 1, VarKind.BINARY,
                                     -config.changeover_weight)
                pm.delta[(m.id, d)] = dvid
                weight = -config.changeover_weight if scheme is Scheme.B else 0.0
                for k in window_molds:
                    vid = model.add_var(f"x[{m.id},{k},{d}]", 0, 1, VarKind.BINARY, weight)
                    pm.x[(m.id, k, d)] = vid
                    x_by_md.setdefault((m.id, d), {})[k] = vid
            for k in molds:
                if scheme is not Scheme.A and (m.id, k.id, d) not in pm.x:
                    continue
                for fid in runnable[k.id]:
                    f = products[fid]
                    t = unit_time(m, f)
                    vid = model.add_var(_y_id(m.id, fid, d), 0, y_cap(m, f, d, t),
                                        VarKind.CONTINUOUS, -(f.unit_cost + rbar))
                    pm.y[(m.id, fid, d)] = vid
                    y_by_md.setdefault((m.id, d), []).append((fid, vid))
                    y_by_fd.setdefault((fid, d), []).append(vid)
        for o, days in q_days.items():
            if d in days:
                order = scenario.order(o)
                pm.q[(o, d)] = model.add_var(f"q[{o},{d}]", 0, residual[o], VarKind.CONTINUOUS,
                                             order.unit_revenue)

    acc_products = sorted({f for (f, _d) in active if products[f].accessory_per_unit > 0})
    for d in window_days:
        for f in acc_products:
            pm.p[(f, d)] = model.add_var(f"p[{f},{d}]", 0, scenario.accessory_capacity_per_day,
                                         VarKind.CONTINUOUS, -scenario.accessory_unit_cost(f))
            pm.inventory[(f, d)] = model.add_var(f"I[{f},{d}]", 0, math.inf)
    for o in residual:
        order = scenario.order(o)
        if order.due_day <= b:
            pm.u[o] = model.add_var(f"u[{o}]", 0, residual[o], VarKind.CONTINUOUS,
                                    order.unit_revenue - order.unit_outsourcing_cost)
            pm.s[o] = model.add_var(f"s[{o}]", 0, residual[o], VarKind.CONTINUOUS,
                                    -order.unit_delay_penalty)

    # constraints
    for d in window_days:
        for m in machines:
            hours = m.day_hours
            if scheme is Scheme.A:
                ys = y_by_md.get((m.id, d))
                if ys:
                    model.add_constraint({vid: unit_time(m, products[f]) for f, vid in ys}, Sense.LE,
                                         hours, f"cap[{m.id},{d}]")
                continue
            xs = x_by_md.get((m.id, d), {})
            if not xs:
                continue
            dvid = pm.delta[(m.id, d)]
            limit = config.max_molds_per_day if scheme is Scheme.B else 1
            if len(xs) > limit:
                model.add_constraint({vid: 1.0 for vid in xs.values()}, Sense.LE, limit,
                                     f"molds[{m.id},{d}]")
            h = m.mold_change_hours
            row = {}
            for k, xvid in xs.items():
                for fid in plan.mold(k).producible_products:
                    yvid = pm.y.get((m.id, fid, d))
                    if yvid is None:
                        continue
                    row[yvid] = unit_time(m, products[fid])
                    cap = model.variables[model.index(yvid)].upper
                    model.add_constraint({yvid: 1.0, xvid: -cap}, Sense.LE, 0.0,
                                         f"bigm[{m.id},{fid},{d}]")
            if row:
                if scheme is Scheme.B:
                    row.update({xvid: row.get(xvid, 0.0) + h for xvid in xs.values()})
                    row[dvid] = h
                    model.add_constraint(row, Sense.LE, hours + h, f"cap[{m.id},{d}]")
                else:
                    row[dvid] = h
                    model.add_constraint(row, Sense.LE, hours, f"cap[{m.id},{d}]")
            for k, xvid in xs.items():
                if d == a:
                    if k == state.last_mold.get(m.id):
                        continue
                    model.add_constraint({xvid: 1.0, dvid: -1.0}, Sense.LE, 0.0, f"chg[{m.id},{k},{d}]")
                else:
                    prev = pm.x.get((m.id, k, d - 1))
                    coeffs = {xvid: 1.0, dvid: -1.0}
                    if prev is not None:
                        coeffs[prev] = -1.0
                    model.add_constraint(coeffs, Sense.LE, 0.0, f"chg[{m.id},{k},{d}]")

    if scheme is Scheme.A:
        _pool_subset_limits(pm, scenario)

    for (f, d), orders in sorted(active.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        row = {vid: 1.0 for vid in y_by_fd.get((f, d), [])}
        for o in orders:
            row[pm.q[(o, d)]] = -1.0
        model.add_constraint(row, Sense.GE, 0.0, f"make[{f},{d}]")

    for f in acc_products:
        h_f = products[f].accessory_per_unit
        carried = state.carried_inventory.get(f, 0.0)
        for d in window_days:
            row = {pm.inventory[(f, d)]: 1.0, pm.p[(f, d)]: -1.0}
            if d > a:
                row[pm.inventory[(f, d - 1)]] = -1.0
            for o in active.get((f, d), []):
                row[pm.q[(o, d)]] = h_f
            model.add_constraint(row, Sense.EQ, carried if d == a else 0.0, f"acc[{f},{d}]")
    if acc_products:
        for d in window_days:
            model.add_constraint({pm.p[(f, d)]: 1.0 for f in acc_products}, Sense.LE,
                                 scenario.accessory_capacity_per_day, f"cnc[{d}]")

    for o, res in residual.items():
        row = {pm.q[(o, d)]: 1.0 for d in q_days[o]}
        if o in pm.u:
            row[pm.u[o]] = 1.0
            row[pm.s[o]] = 1.0
            model.add_constraint(row, Sense.EQ, res, f"fill[{o}]")
        elif len(row) > 1:
            model.add_constraint(row, Sense.LE, res, f"fill[{o}]")
    log.debug("window [%d, %d]: %d variables, %d constraints", a, b, model.n_vars, model.n_constraints)
    return pm


def _pool_subset_limits(pm: PlanningModel, source: Scenario) -> None:
    """Pooled hours per subset of real machines a product family may use.

    Pooling a group would otherwise let adapter-limited molds spread over
    every machine in it.
    """
    model, plan = pm.model, pm.scenario
    members: dict[str, dict[str, frozenset]] = {}
    hours = {m.id: m.day_hours for m in source.machines}
    for f in source.products:
        real = source.machines_for(f.id)
        for pool in plan.machines_for(f.id):
            ids = frozenset(m.id for m in real if m.group == pool.group)
            members.setdefault(pool.id, {})[f.id] = ids
    for pool_id, by_product in sorted(members.items()):
        group_all = frozenset().union(*by_product.values())
        subsets = sorted({s for s in by_product.values() if s != group_all}, key=sorted)
        pool = plan.machine(pool_id)
        for subset in subsets:
            allowed = [f for f, s in by_product.items() if s <= subset]
            cap = sum(hours[m] for m in subset)
            for d in range(pm.window[0], pm.window[1] + 1):
                row = {}
                for f in allowed:
                    vid = pm.y.get((pool_id, f, d))
                    if vid is not None:
                        row[vid] = unit_time(pool, plan.product(f))
                if row:
                    model.add_constraint(row, Sense.LE, cap,
                                         f"subset[{pool_id},{'+'.join(sorted(subset))},{d}]")


def solve_window(pm: PlanningModel, limits: MilpLimits | None = None) -> PlanEnvelope:
    """Solve a window model and keep its frozen days as an envelope."""
    limits = limits or pm.config.solver_limits
    dive = pm.next_day_fixings if pm.x else None
    moves = pm.neighbor_moves if pm.x else None
    starts = [pm.earliest_due_fixings()] if pm.x and pm.config.scheme is Scheme.C else []
    sol = solve_milp(pm.model, limits, incumbent=pm.trivial_solution(), dive=dive, neighbors=moves,
                     starts=starts)
    if not sol.has_solution:
        raise SolverFailure(f"window {pm.window}: solver returned {sol.status.value}")
    return envelope_from_values(pm, sol.values, sol.status.value, sol.gap)


def _clip(v: float) -> float:
    return v if v > EPS else 0.0


def envelope_from_values(pm: PlanningModel, values: Mapping[str, float], status: str = "optimal",
                         gap: float = 0.0) -> PlanEnvelope:
    a, e = pm.window[0], pm.frozen_end
    scen = pm.scenario
    frozen = range(a, e + 1)
    y = {k: _clip(values[v]) for k, v in pm.y.items() if k[2] in frozen and _clip(values[v]) > 0}
    q = {k: _clip(values[v]) for k, v in pm.q.items() if k[1] in frozen and _clip(values[v]) > 0}
    p = {k: _clip(values[v]) for k, v in pm.p.items() if k[1] in frozen and _clip(values[v]) > 0}
    inv = {k: _clip(values[v]) for k, v in pm.inventory.items() if k[1] in frozen}
    if pm.config.scheme is Scheme.A:
        x: dict = {}
        for (m, f, d), v in y.items():
            x.setdefault((m, d), set()).add(scen.product(f).mold)
        x = {k: tuple(sorted(v)) for k, v in x.items()}
    else:
        x = {}
        for (m, k, d), vid in pm.x.items():
            if d in frozen and values[vid] > 0.5:
                x.setdefault((m, d), []).append(k)
        x = {k: tuple(sorted(v)) for k, v in x.items()}
    outsourced, shortfall = {}, {}
    for o in pm.committed:
        u = _clip(values[pm.u[o]])
        shipped = sum(v for (oo, d), v in q.items() if oo == o)
        outsourced[o] = u
        shortfall[o] = max(0.0, pm.residual[o] - shipped - u)
    env = PlanEnvelope((a, e), y, q, x, p, inv, outsourced, 0.0, shortfall, status, gap)
    return replace(env, objective=envelope_objective(env, scen))


def envelope_objective(env: PlanEnvelope, scenario: Scenario) -> float:
    """Profit of an envelope's frozen decisions, without the changeover tie-break."""
    rbar = scenario.mean_labor_rate
    terms = []
    for (o, d), v in env.q.items():
        terms.append(scenario.order(o).unit_revenue * v)
    for o, u in env.outsourced.items():
        order = scenario.order(o)
        terms.append((order.unit_revenue - order.unit_outsourcing_cost) * u)
    for o, s in env.shortfall.items():
        terms.append(-scenario.order(o).unit_delay_penalty * s)
    for (m, f, d), v in env.y.items():
        terms.append(-(scenario.product(f).unit_cost + rbar) * v)
    for (f, d), v in env.p.items():
        terms.append(-scenario.accessory_unit_cost(f) * v)
    return math.fsum(terms)


def _advance(state: RollingState, env: PlanEnvelope, pm: PlanningModel) -> RollingState:
    fulfilled = dict(state.fulfilled_so_far)
    for (o, d), v in env.q.items():
        fulfilled[o] = fulfilled.get(o, 0.0) + v
    outsourced = dict(state.committed_outsourcing)
    for o, u in env.outsourced.items():
        if u > 0:
            outsourced[o] = outsourced.get(o, 0.0) + u
    carried = dict(state.carried_inventory)
    for (f, d), v in env.inventory.items():
        if d == env.window[1]:
            carried[f] = v
    last = dict(state.last_mold)
    if pm.config.scheme is not Scheme.A:
        for m in {m for (m, _k, _d) in pm.x}:
            prev = state.last_mold.get(m)
            for d in env.days:
                molds = env.x.get((m, d), ())
                if molds:  # an idle machine keeps whatever is mounted
                    prev = order_molds(molds, prev)[-1]
            last[m] = prev
    return RollingState(carried, fulfilled, outsourced, last)


def plan_windows(horizon: int, config: SchemeConfig) -> list[tuple[int, int, int]]:
    """(first day, last day, frozen end) for every rolling window."""
    cfg = config.for_horizon(horizon)
    out = []
    start = 1
    while start <= horizon:
        end = min(start + cfg.window_days - 1, horizon)
        frozen = horizon if end == horizon else min(start + cfg.step_days - 1, horizon)
        out.append((start, end, frozen))
        start = frozen + 1
    return out


def rolling_plan(scenario: Scenario, config: SchemeConfig) -> tuple[list[PlanEnvelope], RollingState]:
    """Plan the whole horizon window by window, carrying state forward."""
    if config.scheme is Scheme.GREEDY:
        raise ValueError("the greedy scheme has no planning layer")
    state = RollingState.initial(planning_scenario(scenario, config.scheme))
    envelopes = []
    for a, b, e in plan_windows(scenario.horizon_days, config):
        pm = build_planning_model(scenario, (a, b), state, config, frozen_end=e)
        env = solve_window(pm)
        log.info("window [%d, %d] frozen to %d: %s, Z=%.2f, gap=%.2e", a, b, e, env.status,
                 env.objective, env.gap)
        envelopes.append(env)
        state = _advance(state, env, pm)
    return envelopes, state
