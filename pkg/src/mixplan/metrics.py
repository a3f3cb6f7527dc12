"""Evaluation of a schedule: delivery, accessory synchronization, utilization,
changeover losses and economics.

All functions are pure. Outsourced units count as delivered on the order's
due day. Accessory availability is simulated per product: stock carries
from day to day and covers need together with the day's machining.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .domain import CNC, Scenario, Scheme, unit_time
from .planner import PlanEnvelope, planning_scenario
from .scheduler import Schedule

COVER_TOL = 1e-6


@dataclass
class GroupChangeovers:
    total: int = 0
    avg_per_machine: float = 0.0
    hours: float = 0.0
    loss_fraction: float = 0.0


@dataclass
class EvaluationReport:
    scheme: str
    otd: float
    late_orders: int
    mean_lateness: float
    utilization_per_group: dict[str, float]
    load_variance: dict[str, float]
    changeover_table: dict[str, GroupChangeovers]
    sync_acc: float
    profit: float
    profit_rate: float
    cost_composition: dict[str, float]
    outsourced_units: float
    unassigned_units: float
    revenue: float = 0.0
    costs: dict[str, float] = field(default_factory=dict)
    planner_objective: float | None = None
    solver_status: str | None = None
    solver_gap: float | None = None
    late: list[str] = field(default_factory=list)

    def summary_line(self) -> str:
        return (f"OTD={self.otd:.3f} late={self.late_orders} outsourced={self.outsourced_units:.0f} "
                f"profit_rate={self.profit_rate:.3f} syncacc={self.sync_acc:.3f}")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        lines = [f"scheme            {self.scheme}",
                 f"on-time delivery  {self.otd:.1%} ({self.late_orders} late, "
                 f"mean lateness {self.mean_lateness:.2f} d)",
                 f"outsourced units  {self.outsourced_units:.0f}",
                 f"unassigned units  {self.unassigned_units:.0f}",
                 f"accessory sync    {self.sync_acc:.3f}",
                 f"revenue           {self.revenue:.2f}",
                 f"profit            {self.profit:.2f} (rate {self.profit_rate:.1%})"]
        if self.planner_objective is not None:
            lines.append(f"planner objective {self.planner_objective:.2f} "
                         f"(status {self.solver_status}, gap {self.solver_gap:.2e})")
        lines.append("cost shares       " + ", ".join(
            f"{k} {v:.1%}" for k, v in self.cost_composition.items()))
        lines.append("utilization")
        for g in sorted(self.utilization_per_group):
            lines.append(f"  {g:<6} {self.utilization_per_group[g]:.1%} "
                         f"(variance {self.load_variance.get(g, 0.0):.4f})")
        lines.append("changeovers")
        for g in sorted(self.changeover_table):
            c = self.changeover_table[g]
            lines.append(f"  {g:<6} {c.total} total, {c.avg_per_machine:.1f}/machine, "
                         f"{c.hours:.1f} h, loss {c.loss_fraction:.2%}")
        return "\n".join(lines) + "\n"


def delivered_by_due(schedule: Schedule, scenario: Scenario) -> dict[str, float]:
    """Units that reach each customer by the due day, outsourced units included."""
    out = {o.id: schedule.outsourced.get(o.id, 0.0) for o in scenario.orders}
    for (o, m, d), v in schedule.z.items():
        if d <= scenario.order(o).due_day:
            out[o] += v
    return out


def on_time_delivery(schedule: Schedule, scenario: Scenario) -> tuple[float, list[str]]:
    got = delivered_by_due(schedule, scenario)
    late = [o.id for o in scenario.orders if got[o.id] < o.quantity - COVER_TOL]
    total = len(scenario.orders)
    return (1.0 - len(late) / total if total else 1.0), late


def mean_lateness(schedule: Schedule, scenario: Scenario, late: Sequence[str]) -> float:
    """Days past due until an order completes; H + 1 - due when it never does."""
    if not late:
        return 0.0
    cum: dict[str, list[tuple[int, float]]] = {}
    for (o, m, d), v in schedule.z.items():
        cum.setdefault(o, []).append((d, v))
    total = 0.0
    H = scenario.horizon_days
    for oid in late:
        o = scenario.order(oid)
        have = schedule.outsourced.get(oid, 0.0)
        done = None
        for d, v in sorted(cum.get(oid, [])):
            have += v
            if have >= o.quantity - COVER_TOL:
                done = d
                break
        total += (done - o.due_day) if done is not None and done > o.due_day else (H + 1 - o.due_day)
    return total / len(late)


def sync_acc(schedule: Schedule, envelopes: Sequence[PlanEnvelope] | None,
             scenario: Scenario) -> float:
    """Share of daily accessory need that was available on the day it was needed."""
    need: dict[tuple[str, int], float] = {}
    for (o, m, d), v in schedule.z.items():
        f = scenario.product(scenario.order(o).product)
        if f.accessory_per_unit > 0:
            need[(f.id, d)] = need.get((f.id, d), 0.0) + f.accessory_per_unit * v
    total_need = math.fsum(need.values())
    if total_need <= 0:
        return 1.0
    matched = []
    for f in sorted({f for f, _ in need} | {f for f, _ in schedule.accessory}):
        stock = scenario.initial_accessory_inventory.get(f, 0.0)
        for d in scenario.days:
            avail = stock + schedule.accessory.get((f, d), 0.0)
            want = need.get((f, d), 0.0)
            got = want if avail >= want - COVER_TOL else avail
            matched.append(got)
            stock = max(0.0, avail - want)
    return min(1.0, math.fsum(matched) / total_need)


def utilization(schedule: Schedule, scenario: Scenario):
    """(per-group mean, per-group population variance, per-machine) busy-hour fractions.

    The CNC pool is measured by accessory units machined against its daily capacity.
    """
    plan = planning_scenario(scenario, Scheme.parse(schedule.scheme)
                             if schedule.scheme != Scheme.GREEDY.value else Scheme.C)
    H = scenario.horizon_days
    busy: dict[str, float] = {}
    for (o, m, d), v in schedule.z.items():
        machine = plan.machine(m)
        busy[m] = busy.get(m, 0.0) + v * unit_time(machine, plan.product(plan.order(o).product))
    per_machine = {m.id: busy.get(m.id, 0.0) / (m.day_hours * H) for m in plan.molding_machines}
    groups: dict[str, list[float]] = {}
    for m in plan.molding_machines:
        groups.setdefault(m.group, []).append(per_machine[m.id])
    cnc = [m for m in scenario.machines if m.group == CNC]
    if cnc and scenario.accessory_capacity_per_day > 0:
        share = math.fsum(schedule.accessory.values()) / (scenario.accessory_capacity_per_day * H)
        for m in cnc:
            per_machine[m.id] = share
        groups[CNC] = [share] * len(cnc)
    mean = {g: float(np.mean(v)) for g, v in groups.items()}
    var = {g: float(np.var(v)) for g, v in groups.items()}
    return mean, var, per_machine


def changeover_report(schedule: Schedule, scenario: Scenario) -> dict[str, GroupChangeovers]:
    scheme = schedule.scheme
    plan = planning_scenario(scenario, Scheme.A) if scheme == Scheme.A.value else scenario
    H = scenario.horizon_days
    table = {}
    for g, members in plan.groups().items():
        ids = {m.id for m in members if m in plan.molding_machines}
        if not ids:
            continue
        events = [c for c in schedule.changeovers if c.machine in ids]
        hours = math.fsum(c.hours for c in events)
        available = sum(m.day_hours for m in members if m.id in ids) * H
        table[g] = GroupChangeovers(len(events), len(events) / len(ids), hours,
                                    hours / available if available else 0.0)
    return table


def economics(schedule: Schedule, envelopes: Sequence[PlanEnvelope] | None, scenario: Scenario):
    """(profit, profit rate, cost shares, revenue, absolute costs)."""
    got = delivered_by_due(schedule, scenario)
    rbar = scenario.mean_labor_rate
    revenue = math.fsum(scenario.order(o).unit_revenue * v for o, v in got.items())
    produced: dict[str, float] = {}
    for (o, m, d), v in schedule.z.items():
        f = scenario.order(o).product
        produced[f] = produced.get(f, 0.0) + v
    material = math.fsum([scenario.product(f).unit_cost * v for f, v in produced.items()]
                         + [scenario.accessory_unit_cost(f) * v for (f, d), v in schedule.accessory.items()])
    labor = rbar * math.fsum(produced.values())
    outsourcing = math.fsum(scenario.order(o).unit_outsourcing_cost * u
                            for o, u in schedule.outsourced.items())
    delay = math.fsum(o.unit_delay_penalty * max(0.0, o.quantity - got[o.id]) for o in scenario.orders)
    costs = {"material": material, "labor": labor, "outsourcing": outsourcing, "delay_penalty": delay}
    total = math.fsum(costs.values())
    profit = revenue - total
    shares = {k: (v / total if total > 0 else 0.0) for k, v in costs.items()}
    rate = profit / revenue if revenue > 0 else 0.0
    return profit, rate, shares, revenue, costs


def envelope_economics(envelopes: Sequence[PlanEnvelope], scenario: Scenario):
    """(profit, profit rate, cost shares, revenue, absolute costs) of the plan itself.

    Shipments and outsourced units earn revenue; production, accessories,
    outsourcing and unmet residual demand cost what the plan says they do.
    """
    rbar = scenario.mean_labor_rate
    revenue, material, labor, outsourcing, delay = [], [], [], [], []
    for env in envelopes:
        for (o, d), v in env.q.items():
            revenue.append(scenario.order(o).unit_revenue * v)
        for o, u in env.outsourced.items():
            order = scenario.order(o)
            revenue.append(order.unit_revenue * u)
            outsourcing.append(order.unit_outsourcing_cost * u)
        for o, s in env.shortfall.items():
            delay.append(scenario.order(o).unit_delay_penalty * s)
        for (m, f, d), v in env.y.items():
            material.append(scenario.product(f).unit_cost * v)
            labor.append(rbar * v)
        for (f, d), v in env.p.items():
            material.append(scenario.accessory_unit_cost(f) * v)
    costs = {"material": math.fsum(material), "labor": math.fsum(labor),
             "outsourcing": math.fsum(outsourcing), "delay_penalty": math.fsum(delay)}
    total = math.fsum(costs.values())
    rev = math.fsum(revenue)
    profit = rev - total
    shares = {k: (v / total if total > 0 else 0.0) for k, v in costs.items()}
    return profit, (profit / rev if rev > 0 else 0.0), shares, rev, costs


def evaluate(schedule: Schedule, envelopes: Sequence[PlanEnvelope] | None,
             scenario: Scenario) -> EvaluationReport:
    otd, late = on_time_delivery(schedule, scenario)
    util, var, _ = utilization(schedule, scenario)
    profit, rate, shares, revenue, costs = economics(schedule, envelopes, scenario)
    planner_objective = status = gap = None
    if envelopes:
        planner_objective = math.fsum(e.objective for e in envelopes)
        order = ["optimal", "feasible"]
        status = max((e.status for e in envelopes), key=lambda s: order.index(s) if s in order else 2)
        gap = max(e.gap for e in envelopes)
    return EvaluationReport(
        scheme=schedule.scheme, otd=otd, late_orders=len(late),
        mean_lateness=mean_lateness(schedule, scenario, late),
        utilization_per_group=util, load_variance=var,
        changeover_table=changeover_report(schedule, scenario),
        sync_acc=sync_acc(schedule, envelopes, scenario), profit=profit, profit_rate=rate,
        cost_composition=shares, outsourced_units=math.fsum(schedule.outsourced.values()),
        unassigned_units=math.fsum(schedule.unassigned.values()), revenue=revenue, costs=costs,
        planner_objective=planner_objective, solver_status=status, solver_gap=gap, late=late,
    )
