"""Daily disaggregation of plan envelopes into machine-level allocations.

Within a day, orders are served in priority order; each order goes to a
machine whose mounted mold makes its product, preferring machines that ran
the same product with the same mold the day before, then the machine with
most hours left. Whatever cannot be placed is kept in ``unassigned`` rather
than dropped.

Molds stay mounted over idle days: a changeover is charged only when the
first mold of a day differs from the one physically on the machine.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

from .domain import (Machine, Order, Scenario, Scheme, SchemeConfig, effective_capacity,
                     order_molds, unit_time)
from .errors import EnvelopeDayMissing
from .planner import PlanEnvelope, planning_scenario

log = logging.getLogger(__name__)

EPS = 1e-9


@dataclass(frozen=True)
class Changeover:
    machine: str
    day: int
    from_mold: str | None
    to_mold: str
    hours: float


@dataclass
class Schedule:
    z: dict[tuple[str, str, int], float] = field(default_factory=dict)
    mold_state: dict[tuple[str, int], tuple[str, ...]] = field(default_factory=dict)
    changeovers: list[Changeover] = field(default_factory=list)
    unassigned: dict[tuple[str, int], float] = field(default_factory=dict)
    accessory: dict[tuple[str, int], float] = field(default_factory=dict)  # units machined per day
    outsourced: dict[str, float] = field(default_factory=dict)
    initial_molds: dict[str, str | None] = field(default_factory=dict)
    scheme: str = Scheme.C.value

    def busy_hours(self, scenario: Scenario, machine: str, day: int) -> float:
        m = scenario.machine(machine)
        return math.fsum(v * unit_time(m, scenario.product(scenario.order(o).product))
                         for (o, mm, d), v in self.z.items() if mm == machine and d == day)


class OrderPriority(NamedTuple):
    due: int
    slack: int
    penalty: float


def priority(order: Order, day: int) -> OrderPriority:
    return OrderPriority(order.due_day, order.due_day - day, order.unit_delay_penalty)


def _sort_key(order: Order, day: int, descending_penalty: bool):
    p = priority(order, day)
    return (p.due, p.slack, -p.penalty if descending_penalty else p.penalty, order.id)


@dataclass
class MachineDay:
    """Yesterday's outcome on one machine: the mold physically mounted and what it made."""

    mounted: str | None = None
    products: frozenset = frozenset()


@dataclass
class DaySchedule:
    z: dict
    mold_state: dict
    changeovers: list
    unassigned: dict
    after: dict[str, MachineDay]  # state handed to the next day


def day_changes(molds: Sequence[str], mounted: str | None) -> int:
    """Mold swaps needed to run ``molds`` in order on a machine holding ``mounted``."""
    if not molds:
        return 0
    return (0 if molds[0] == mounted else 1) + len(molds) - 1


def schedule_day(envelope: PlanEnvelope, day: int, prev_day_assignment: Mapping[str, MachineDay],
                 scenario: Scenario, config: SchemeConfig | None = None) -> DaySchedule:
    """Allocate one day's planned shipments to machines.

    ``scenario`` must be the planning scenario the envelope refers to.
    """
    if not envelope.covers(day):
        raise EnvelopeDayMissing(f"envelope {envelope.window} does not cover day {day}")
    config = config or SchemeConfig()
    pooled = config.scheme is Scheme.A
    machines = scenario.molding_machines
    prev = {m.id: prev_day_assignment.get(m.id, MachineDay(m.initial_mold)) for m in machines}

    cap: dict[str, float] = {}
    molds_today: dict[str, list[str]] = {}
    changeovers = []
    mold_state = {}
    for m in machines:
        mounted = prev[m.id].mounted
        molds = order_molds(envelope.x.get((m.id, day), ()), mounted)
        molds_today[m.id] = molds
        if molds:
            mold_state[(m.id, day)] = tuple(molds)
        n = 0 if pooled else day_changes(molds, mounted)
        cap[m.id] = effective_capacity(m, n)
        if not pooled:
            chain = [mounted] + molds
            for a, b in zip(chain, chain[1:]):
                if a != b:
                    changeovers.append(Changeover(m.id, day, a, b, m.mold_change_hours))

    y_res = {(m, f): v for (m, f, d), v in envelope.y.items() if d == day}
    todo = [(scenario.order(o), v) for (o, d), v in envelope.q.items() if d == day and v > 0]
    todo.sort(key=lambda t: _sort_key(t[0], day, config.penalty_descending))

    z: dict[tuple[str, str, int], float] = {}
    unassigned = {}
    made: dict[str, set] = {m.id: set() for m in machines}
    for order, need in todo:
        f = scenario.product(order.product)
        candidates = [m for m in machines
                      if f.mold in molds_today[m.id] and y_res.get((m.id, f.id), 0.0) > EPS
                      and cap[m.id] > EPS]
        while need > EPS and candidates:
            stable = [m for m in candidates
                      if prev[m.id].mounted == f.mold and f.id in prev[m.id].products]
            pool = stable or candidates
            best = min(pool, key=lambda m: (-cap[m.id], m.id))
            t = unit_time(best, f)
            u = min(need, y_res[(best.id, f.id)], cap[best.id] / t)
            if u <= EPS:
                candidates.remove(best)
                continue
            key = (order.id, best.id, day)
            z[key] = z.get(key, 0.0) + u
            need -= u
            y_res[(best.id, f.id)] -= u
            cap[best.id] = max(0.0, cap[best.id] - u * t)
            made[best.id].add(f.id)
            candidates = [m for m in candidates
                          if y_res.get((m.id, f.id), 0.0) > EPS and cap[m.id] > EPS]
        if need > EPS:
            unassigned[(order.id, day)] = need

    after = {}
    for m in machines:
        molds = molds_today[m.id]
        after[m.id] = MachineDay(molds[-1] if molds else prev[m.id].mounted,
                                 frozenset(made[m.id]) if molds else frozenset())
    return DaySchedule(z, mold_state, changeovers, unassigned, after)


def _envelope_for(envelopes: Sequence[PlanEnvelope], day: int) -> PlanEnvelope:
    for env in envelopes:
        if env.covers(day):
            return env
    raise EnvelopeDayMissing(f"no envelope covers day {day}")


def schedule_horizon(envelopes: Sequence[PlanEnvelope], scenario: Scenario,
                     config: SchemeConfig | None = None) -> Schedule:
    """Run the daily heuristic over the whole horizon."""
    config = config or SchemeConfig()
    plan = planning_scenario(scenario, config.scheme)
    state = {m.id: MachineDay(m.initial_mold) for m in plan.molding_machines}
    out = Schedule(scheme=config.scheme.value,
                   initial_molds={m.id: m.initial_mold for m in plan.molding_machines})
    for day in plan.days:
        env = _envelope_for(envelopes, day)
        part = schedule_day(env, day, state, plan, config)
        out.z.update(part.z)
        out.mold_state.update(part.mold_state)
        out.changeovers.extend(part.changeovers)
        out.unassigned.update(part.unassigned)
        state = part.after
    for env in envelopes:
        out.accessory.update({k: v for k, v in env.p.items() if v > 0})
        out.outsourced.update({o: u for o, u in env.outsourced.items() if u > 0})
    if out.unassigned:
        log.info("%d order-days left partly unassigned (%.1f units)", len(out.unassigned),
                 sum(out.unassigned.values()))
    return out


@dataclass(frozen=True)
class Violation:
    rule: str  # "shipments", "production", "capacity", "mold", "changeover", "window", "molds-per-day"
    key: tuple
    residual: float
    message: str

    def __str__(self) -> str:
        return f"[{self.rule}] {self.message} (residual {self.residual:.6g})"


def _tol(scale: float) -> float:
    return 1e-9 * (1.0 + abs(scale))


def _mounted_before(schedule: Schedule, machine: str, day: int) -> str | None:
    for d in range(day - 1, 0, -1):
        molds = schedule.mold_state.get((machine, d))
        if molds:
            return molds[-1]
    return schedule.initial_molds.get(machine)


def mold_change_count(schedule: Schedule, machine: str, day: int) -> int:
    """Mold swaps on a machine-day, recomputed from the recorded mold states."""
    molds = schedule.mold_state.get((machine, day), ())
    if not molds or Scheme.parse(schedule.scheme) is Scheme.A:
        return 0
    mounted = _mounted_before(schedule, machine, day)
    if Scheme.parse(schedule.scheme) is Scheme.B:
        return day_changes(molds, mounted)
    # singleton sets: half their symmetric difference is 0 or 1; a first mount counts
    return 0 if molds[0] == mounted else 1


def verify_schedule(schedule: Schedule, envelopes: Sequence[PlanEnvelope] | None,
                    scenario: Scenario, config: SchemeConfig | None = None) -> list[Violation]:
    """Every way ``schedule`` breaks the plan or the plant, recomputed from scratch.

    Without envelopes (greedy schedules) only the plant-side checks run.
    """
    scheme = Scheme.parse(schedule.scheme)
    config = config or SchemeConfig(scheme=scheme)
    plan = planning_scenario(scenario, scheme)
    out: list[Violation] = []
    z = schedule.z
    machines = {m.id: m for m in plan.molding_machines}

    for (o, m, d), v in sorted(z.items()):
        if v < 0:
            out.append(Violation("shipments", (o, m, d), -v, f"negative allocation z[{o},{m},{d}]"))
        order = plan.order(o)
        if not order.release_day <= d <= order.due_day and v > 0:
            out.append(Violation("window", (o, m, d), v,
                                 f"order {o} allocated on day {d} outside [{order.release_day}, {order.due_day}]"))
        if m not in machines:
            out.append(Violation("mold", (o, m, d), v, f"unknown molding machine {m}"))
            continue
        mold = plan.mold(plan.product(order.product).mold)
        if v > 0 and (m not in mold.compatible_machines
                      or mold.id not in schedule.mold_state.get((m, d), ())):
            out.append(Violation("mold", (o, m, d), v,
                                 f"order {o} on {m} day {d} without mold {mold.id} mounted"))

    if envelopes is not None:
        planned_q: dict[tuple[str, int], float] = {}
        planned_y: dict[tuple[str, str, int], float] = {}
        planned_x: dict[tuple[str, int], tuple] = {}
        for env in envelopes:
            planned_q.update(env.q)
            planned_y.update(env.y)
            planned_x.update(env.x)
        shipped: dict[tuple[str, int], float] = {}
        made: dict[tuple[str, str, int], float] = {}
        for (o, m, d), v in z.items():
            shipped[(o, d)] = shipped.get((o, d), 0.0) + v
            f = plan.order(o).product
            made[(m, f, d)] = made.get((m, f, d), 0.0) + v
        for key in sorted(set(planned_q) | set(shipped) | set(schedule.unassigned)):
            target = planned_q.get(key, 0.0)
            got = shipped.get(key, 0.0) + schedule.unassigned.get(key, 0.0)
            if abs(got - target) > _tol(target):
                out.append(Violation("shipments", key, abs(got - target),
                                     f"order {key[0]} day {key[1]}: allocated+unassigned {got:.6f} "
                                     f"!= planned {target:.6f}"))
        for key in sorted(made):
            limit = planned_y.get(key, 0.0)
            if made[key] > limit + _tol(limit):
                out.append(Violation("production", key, made[key] - limit,
                                     f"{key[0]} day {key[2]} makes {made[key]:.6f} of {key[1]}, "
                                     f"plan allows {limit:.6f}"))
        for key in sorted(set(planned_x) | set(schedule.mold_state)):
            if set(planned_x.get(key, ())) != set(schedule.mold_state.get(key, ())):
                out.append(Violation("mold", key, 1.0,
                                     f"{key[0]} day {key[1]} mounts {schedule.mold_state.get(key, ())}, "
                                     f"plan says {planned_x.get(key, ())}"))

    limit = config.max_molds_per_day if scheme is Scheme.B else (None if scheme is Scheme.A else 1)
    busy: dict[tuple[str, int], float] = {}
    for (o, m, d), v in z.items():
        if m in machines:
            t = unit_time(machines[m], plan.product(plan.order(o).product))
            busy[(m, d)] = busy.get((m, d), 0.0) + v * t
    events: dict[tuple[str, int], int] = {}
    for c in schedule.changeovers:
        events[(c.machine, c.day)] = events.get((c.machine, c.day), 0) + 1
    for m_id, m in sorted(machines.items()):
        for d in plan.days:
            molds = schedule.mold_state.get((m_id, d), ())
            if limit is not None and len(molds) > limit:
                out.append(Violation("molds-per-day", (m_id, d), len(molds) - limit,
                                     f"{m_id} day {d} mounts {len(molds)} molds (limit {limit})"))
            n = mold_change_count(schedule, m_id, d)
            if scheme is not Scheme.A and events.get((m_id, d), 0) != n:
                out.append(Violation("changeover", (m_id, d), abs(events.get((m_id, d), 0) - n),
                                     f"{m_id} day {d}: {events.get((m_id, d), 0)} changeovers recorded, "
                                     f"mold states imply {n}"))
            cap = effective_capacity(m, 0 if scheme is Scheme.A else n)
            used = busy.get((m_id, d), 0.0)
            if used > cap + _tol(cap):
                out.append(Violation("capacity", (m_id, d), used - cap,
                                     f"{m_id} day {d} busy {used:.6f}h exceeds {cap:.6f}h"))
    return out


def greedy_noplan(scenario: Scenario, config: SchemeConfig | None = None) -> Schedule:
    """Earliest-due-date dispatching with no plan: molds claimed on demand, accessories same-day."""
    config = config or SchemeConfig(scheme=Scheme.GREEDY)
    machines = scenario.molding_machines
    mounted = {m.id: m.initial_mold for m in machines}
    made_prev: dict[str, frozenset] = {m.id: frozenset() for m in machines}
    remaining = {o.id: o.quantity for o in scenario.orders}
    out = Schedule(scheme=Scheme.GREEDY.value, initial_molds=dict(mounted))
    first = scenario.material_lead_days + 1
    for day in scenario.days:
        cap = {m.id: m.day_hours for m in machines}
        claimed: dict[str, str] = {}
        made: dict[str, set] = {m.id: set() for m in machines}
        todo = [o for o in scenario.orders
                if o.release_day <= day <= o.due_day and remaining[o.id] > EPS and day >= first]
        todo.sort(key=lambda o: _sort_key(o, day, config.penalty_descending))
        for order in todo:
            f = scenario.product(order.product)
            while remaining[order.id] > EPS:
                options = []
                for m in machines:
                    if m.id not in scenario.mold(f.mold).compatible_machines:
                        continue
                    if m.id in claimed and claimed[m.id] != f.mold:
                        continue
                    left = cap[m.id]
                    if m.id not in claimed and mounted[m.id] != f.mold:
                        left -= m.mold_change_hours
                    if left <= EPS:
                        continue
                    stable = mounted[m.id] == f.mold and f.id in made_prev[m.id]
                    options.append((not (m.id in claimed), not stable, -left, m.id, m))
                if not options:
                    break
                *_, m = min(options)
                if m.id not in claimed:
                    claimed[m.id] = f.mold
                    if mounted[m.id] != f.mold:
                        out.changeovers.append(Changeover(m.id, day, mounted[m.id], f.mold,
                                                          m.mold_change_hours))
                        cap[m.id] -= m.mold_change_hours
                    mounted[m.id] = f.mold
                    out.mold_state[(m.id, day)] = (f.mold,)
                t = unit_time(m, f)
                u = min(remaining[order.id], cap[m.id] / t)
                key = (order.id, m.id, day)
                out.z[key] = out.z.get(key, 0.0) + u
                remaining[order.id] -= u
                cap[m.id] = max(0.0, cap[m.id] - u * t)
                made[m.id].add(f.id)
            if order.due_day == day and remaining[order.id] > EPS:
                out.unassigned[(order.id, day)] = remaining[order.id]
        # accessories machined the same day they are needed, nothing ahead
        need: dict[str, float] = {}
        for (o, m, d), v in out.z.items():
            if d == day:
                f = scenario.product(scenario.order(o).product)
                if f.accessory_per_unit > 0:
                    need[f.id] = need.get(f.id, 0.0) + v * f.accessory_per_unit
        left = scenario.accessory_capacity_per_day
        for f in sorted(need):
            units = min(need[f], left)
            if units > EPS:
                out.accessory[(f, day)] = units
                left -= units
        made_prev = {m: frozenset(s) for m, s in made.items()}
    for o in scenario.orders:
        if remaining[o.id] > EPS and (o.id, o.due_day) not in out.unassigned:
            out.unassigned[(o.id, o.due_day)] = remaining[o.id]
    return out
