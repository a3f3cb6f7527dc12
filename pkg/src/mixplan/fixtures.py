"""Seeded scenario families used by the acceptance suite and the CLI.

All families start from the desk-scale plant (a quarter of the case fleet,
12 products, 30 orders, 30 days) and are pure functions of their seeds.
Load is measured against effective capacity: molding hours minus one mold
change per machine-day, counted only on days after the material lead time.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import replace
from typing import Iterator

from .domain import Order, Product, Scenario, unit_time
from .scenario_io import GeneratorSpec, generate_case_scenario

DESK = dict(scale=0.25, n_products=12, n_orders=30, horizon_days=30)
FEASIBLE_LOAD = 0.85
FEASIBLE_DEMAND_SHARE = 0.55  # of raw molding capacity; the load check decides acceptance
ACCESSORY_HEADROOM = 1.2  # CNC capacity as a multiple of the average daily accessory need
BOTTLENECK_OVERLOAD = 1.25
# Feasible scenarios use fewer, larger orders: with thirty small orders on
# three machines most orders fill about one machine-day, and dedicating a
# whole day to one mold wastes the rest of it.
FEASIBLE_SHAPE = dict(n_products=8, n_orders=12)


def desk_spec(seed: int, **overrides) -> GeneratorSpec:
    return GeneratorSpec(seed=seed, **{**DESK, **overrides})


def desk_scenario(seed: int, **overrides) -> Scenario:
    return generate_case_scenario(desk_spec(seed, **overrides))


def _production_days(scenario: Scenario, first: int, last: int) -> int:
    return max(0, last - max(first, scenario.material_lead_days + 1) + 1)


def effective_daily_units(scenario: Scenario, machine_id: str) -> float:
    m = scenario.machine(machine_id)
    hours = max(0.0, m.day_hours - m.mold_change_hours)
    return hours / m.unit_time_default


def raw_daily_units(scenario: Scenario) -> float:
    return sum(m.day_hours / m.unit_time_default for m in scenario.molding_machines)


def aggregate_load(scenario: Scenario) -> float:
    """Total demand over total effective capacity of the production days."""
    days = _production_days(scenario, 1, scenario.horizon_days)
    cap = days * sum(effective_daily_units(scenario, m.id) for m in scenario.molding_machines)
    demand = math.fsum(o.quantity for o in scenario.orders)
    return demand / cap if cap > 0 else math.inf


def peak_load(scenario: Scenario) -> float:
    """Worst demand-to-capacity ratio over every day interval and machine subset.

    Only orders whose whole window lies inside the interval, and whose mold
    fits nothing outside the subset, are counted against it. A value at or
    below one is necessary for serving every order in-house.
    """
    compat = {}
    for o in scenario.orders:
        mold = scenario.mold(scenario.product(o.product).mold)
        compat[o.id] = frozenset(mold.compatible_machines) & {m.id for m in scenario.molding_machines}
    sets = sorted(set(compat.values()), key=sorted)
    unions = set()
    for r in range(1, len(sets) + 1):
        for combo in itertools.combinations(sets, r):
            unions.add(frozenset().union(*combo))
    H = scenario.horizon_days
    worst = 0.0
    for union in unions:
        daily = sum(effective_daily_units(scenario, m) for m in union)
        inside = [o for o in scenario.orders if compat[o.id] <= union]
        for first in range(1, H + 1):
            for last in range(first, H + 1):
                demand = math.fsum(o.quantity for o in inside
                                   if first <= o.release_day and o.due_day <= last)
                if demand <= 0:
                    continue
                cap = daily * _production_days(scenario, first, last)
                worst = max(worst, demand / cap if cap > 0 else math.inf)
    return worst


def accessory_load(scenario: Scenario) -> float:
    """Worst ratio of accessories due by a day to what the CNC pool can make by then.

    Accessories may be machined ahead from day one, so only cumulative need
    matters.
    """
    need = {}
    for o in scenario.orders:
        h = scenario.product(o.product).accessory_per_unit
        if h > 0:
            need[o.due_day] = need.get(o.due_day, 0.0) + h * o.quantity
    stock = math.fsum(scenario.initial_accessory_inventory.values())
    worst, due = 0.0, 0.0
    for d in sorted(need):
        due += need[d]
        cap = stock + scenario.accessory_capacity_per_day * d
        worst = max(worst, due / cap if cap > 0 else math.inf)
    return worst


def inhouse_cheaper(scenario: Scenario) -> bool:
    """True when making every order, accessories included, costs less than buying it."""
    rbar = scenario.mean_labor_rate
    for o in scenario.orders:
        f = scenario.product(o.product)
        make = f.unit_cost + rbar + f.accessory_per_unit * scenario.accessory_unit_cost(f.id)
        if not make < o.unit_outsourcing_cost:
            return False
    return True


def feasible_family(count: int, first_seed: int = 0, max_tries: int = 1000) -> Iterator[Scenario]:
    """Desk-fleet scenarios whose demand fits effective capacity in every interval.

    Orders are fewer and larger than the desk default (``FEASIBLE_SHAPE``).
    Due dates are spread evenly and demand is set well below capacity; seeds
    whose worst molding interval or cumulative accessory need still exceeds
    ``FEASIBLE_LOAD`` are skipped, and so are seeds where buying some order
    outright would be cheaper than making it.
    """
    made = 0
    for seed in range(first_seed, first_seed + max_tries):
        probe = desk_scenario(seed, **FEASIBLE_SHAPE)
        demand = FEASIBLE_DEMAND_SHARE * raw_daily_units(probe) * _production_days(
            probe, 1, probe.horizon_days)
        s = desk_scenario(seed, due_clustering=0.0, demand_total=demand, **FEASIBLE_SHAPE)
        if min(o.due_day - o.release_day + 1 for o in s.orders) < 3:
            continue
        if max(aggregate_load(s), peak_load(s), accessory_load(s)) > FEASIBLE_LOAD:
            continue
        if not inhouse_cheaper(s):
            continue
        yield s
        made += 1
        if made == count:
            return


def accessory_need_profile(scenario: Scenario) -> dict[int, float]:
    """Daily accessory need if every order were spread evenly over its window."""
    need = {d: 0.0 for d in scenario.days}
    first = scenario.material_lead_days + 1
    for o in scenario.orders:
        h = scenario.product(o.product).accessory_per_unit
        if h <= 0:
            continue
        days = range(max(o.release_day, first), o.due_day + 1)
        for d in days:
            need[d] += h * o.quantity / len(days)
    return need


def accessory_bottleneck(seed: int, max_tries: int = 200) -> Scenario:
    """Desk scenario whose CNC pool is short on peak days but ample on average.

    Capacity is set to ``ACCESSORY_HEADROOM`` times the average daily need
    over the production days, which must stay below the peak day's need.
    """
    for s in range(seed, seed + max_tries):
        base = desk_scenario(s, accessory_fraction=0.5, due_clustering=0.0)
        base = _fit_demand(base, FEASIBLE_DEMAND_SHARE)
        need = accessory_need_profile(base)
        days = _production_days(base, 1, base.horizon_days)
        avg = math.fsum(need.values()) / days if days else 0.0
        cap = ACCESSORY_HEADROOM * avg
        if avg > 0 and cap < max(need.values()):
            return replace(base, accessory_capacity_per_day=round(cap, 3))
    raise ValueError(f"no accessory-bottleneck scenario within {max_tries} seeds of {seed}")


def _fit_demand(scenario: Scenario, share: float) -> Scenario:
    target = share * raw_daily_units(scenario) * _production_days(scenario, 1, scenario.horizon_days)
    total = math.fsum(o.quantity for o in scenario.orders)
    return _rescale(scenario, {o.id: target / total for o in scenario.orders})


def _rescale(scenario: Scenario, factor: dict[str, float]) -> Scenario:
    orders = tuple(replace(o, quantity=float(max(1, round(o.quantity * factor.get(o.id, 1.0)))))
                   for o in scenario.orders)
    return _with_orders(scenario, orders)


def _with_orders(scenario: Scenario, orders) -> Scenario:
    demand: dict[str, float] = {}
    for o in orders:
        demand[o.product] = demand.get(o.product, 0.0) + o.quantity
    products = []
    for f in scenario.products:
        fastest = max(m.day_hours / unit_time(m, f) for m in scenario.machines_for(f.id))
        cap = min(demand.get(f.id, 0.0), math.floor(fastest) * scenario.horizon_days)
        products.append(replace(f, big_m_cap=float(max(cap, 1.0))))
    return replace(scenario, orders=tuple(orders), products=tuple(products))


def group_bottleneck(seed: int) -> Scenario:
    """Desk scenario where the adapter-limited family outgrows its machines.

    Orders of products that only the G130 group (plus adapters) can mold are
    scaled to ``BOTTLENECK_OVERLOAD`` times the raw capacity of those
    machines. Prices are rewritten so that internal production beats
    outsourcing while outsourcing still beats the material bill:
    c_f + labor < gamma_o < R_o - c_f.
    """
    base = desk_scenario(seed)
    molding = {m.id for m in base.molding_machines}
    sets = {}
    for o in base.orders:
        mold = base.mold(base.product(o.product).mold)
        sets[o.id] = frozenset(mold.compatible_machines) & molding
    narrow = min(set(sets.values()), key=lambda s: (sum(base.machine(m).day_hours
                                                         / base.machine(m).unit_time_default
                                                         for m in s), sorted(s)))
    days = _production_days(base, 1, base.horizon_days)
    cap = days * sum(base.machine(m).day_hours / base.machine(m).unit_time_default for m in narrow)
    family = [o for o in base.orders if sets[o.id] == narrow]
    demand = math.fsum(o.quantity for o in family)
    factor = {o.id: BOTTLENECK_OVERLOAD * cap / demand for o in family}
    scaled = _rescale(base, factor)
    rbar = scaled.mean_labor_rate
    orders = []
    for o in scaled.orders:
        c = scaled.product(o.product).unit_cost
        revenue = round(1.3 * (2 * c + rbar), 4)
        gamma = round(0.5 * ((c + rbar) + (revenue - c)), 4)
        orders.append(replace(o, unit_revenue=revenue, unit_outsourcing_cost=gamma))
    return _with_orders(scaled, orders)
