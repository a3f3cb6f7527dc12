"""Immutable problem data: machines, molds, products, orders and scenarios.

Capacities are kept in hours per day. A product's processing time on a
machine (hours/unit) is the machine default unless the product overrides it.
Product/machine compatibility is derived from the product's mold, never
stored separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Iterable, Mapping

from .errors import IncompatiblePair, UnknownId, ValidationError
from .milp.model import MilpLimits

G150 = "G150"
G130 = "G130"
CNC = "CNC"
STANDARD_GROUPS = (G150, G130, CNC)


def _frozen_map(value: Mapping | None) -> Mapping:
    return MappingProxyType(dict(value or {}))


@dataclass(frozen=True)
class Machine:
    id: str
    group: str
    unit_time_default: float
    day_hours: float = 24.0
    mold_change_hours: float = 5.0
    initial_mold: str | None = None

    def problems(self) -> list[str]:
        out = []
        where = f"machine {self.id!r}"
        if not self.day_hours > 0:
            out.append(f"{where}: day_hours must be > 0")
        if not 0 <= self.mold_change_hours < self.day_hours:
            out.append(f"{where}: mold_change_hours must lie in [0, day_hours)")
        if not self.unit_time_default > 0:
            out.append(f"{where}: unit_time_default must be > 0")
        return out


@dataclass(frozen=True)
class Mold:
    id: str
    compatible_machines: frozenset[str]
    producible_products: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "compatible_machines", frozenset(self.compatible_machines))
        object.__setattr__(self, "producible_products", frozenset(self.producible_products))


@dataclass(frozen=True, eq=False)
class Product:
    id: str
    mold: str
    unit_cost: float
    big_m_cap: float
    accessory_per_unit: float = 0.0
    unit_time_overrides: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "unit_time_overrides", _frozen_map(self.unit_time_overrides))

    def __eq__(self, other):
        if not isinstance(other, Product):
            return NotImplemented
        return (self.id, self.mold, self.unit_cost, self.big_m_cap, self.accessory_per_unit,
                dict(self.unit_time_overrides)) == (
            other.id, other.mold, other.unit_cost, other.big_m_cap, other.accessory_per_unit,
            dict(other.unit_time_overrides))

    def __hash__(self):
        return hash(self.id)


@dataclass(frozen=True)
class Order:
    id: str
    product: str
    quantity: float
    release_day: int
    due_day: int
    unit_revenue: float
    unit_delay_penalty: float
    unit_outsourcing_cost: float


class Scheme(str, Enum):
    A = "A"
    B = "B"
    C = "C"
    GREEDY = "greedy"

    @classmethod
    def parse(cls, text: str) -> "Scheme":
        key = text.strip()
        for member in cls:
            if member.value.lower() == key.lower() or member.name.lower() == key.lower():
                return member
        if key.lower() in ("greedynoplan", "greedy-noplan", "greedy_noplan"):
            return cls.GREEDY
        raise ValueError(f"unknown scheme {text!r}")


# Planning windows run a fixed node budget after the guided dive. Node counts,
# unlike wall time, keep the plan identical from run to run.
PLANNER_LIMITS = MilpLimits(max_nodes=20, time_limit=600.0, gap_tol=1e-4, max_moves=800)


@dataclass(frozen=True)
class SchemeConfig:
    scheme: Scheme = Scheme.C
    max_molds_per_day: int = 3
    window_days: int = 30
    step_days: int | None = None
    solver_limits: MilpLimits = PLANNER_LIMITS
    # Alg. 2 sorts the penalty component ascending; flip to put costly orders first.
    penalty_descending: bool = False
    # Objective weight per changeover event; breaks ties between equal-profit plans.
    changeover_weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme) if isinstance(self.scheme, str)
                           and not isinstance(self.scheme, Scheme) else self.scheme)
        if self.max_molds_per_day < 1:
            raise ValueError("max_molds_per_day must be >= 1")
        if self.window_days < 1:
            raise ValueError("window_days must be >= 1")
        step = self.window_days if self.step_days is None else self.step_days
        if not 1 <= step <= self.window_days:
            raise ValueError("step_days must lie in [1, window_days]")
        object.__setattr__(self, "step_days", step)
        if self.changeover_weight < 0:
            raise ValueError("changeover_weight must be >= 0")

    def for_horizon(self, horizon: int) -> "SchemeConfig":
        """Clip the rolling window to the horizon."""
        window = min(self.window_days, horizon)
        step = min(self.step_days, window)
        if window == self.window_days and step == self.step_days:
            return self
        return SchemeConfig(self.scheme, self.max_molds_per_day, window, step, self.solver_limits,
                            self.penalty_descending, self.changeover_weight)


@dataclass(frozen=True, eq=False)
class Scenario:
    horizon_days: int
    machines: tuple[Machine, ...]
    molds: tuple[Mold, ...]
    products: tuple[Product, ...]
    orders: tuple[Order, ...]
    accessory_capacity_per_day: float
    labor_rates: tuple[float, ...] = (0.10, 0.12, 0.15)
    material_lead_days: int = 3
    initial_accessory_inventory: Mapping[str, float] = field(default_factory=dict)
    # Accessory material cost per unit, as a fraction of the shell unit cost.
    accessory_cost_ratio: float = 0.0

    def __post_init__(self):
        for name in ("machines", "molds", "products", "orders", "labor_rates"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "initial_accessory_inventory",
                           _frozen_map(self.initial_accessory_inventory))
        errors = self._collect_problems()
        if errors:
            raise ValidationError(errors)
        object.__setattr__(self, "_machines", {m.id: m for m in self.machines})
        object.__setattr__(self, "_molds", {k.id: k for k in self.molds})
        object.__setattr__(self, "_products", {f.id: f for f in self.products})
        object.__setattr__(self, "_orders", {o.id: o for o in self.orders})

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (self.horizon_days, self.machines, self.molds, self.products, self.orders,
                self.accessory_capacity_per_day, self.labor_rates, self.material_lead_days,
                dict(self.initial_accessory_inventory), self.accessory_cost_ratio) == (
            other.horizon_days, other.machines, other.molds, other.products, other.orders,
            other.accessory_capacity_per_day, other.labor_rates, other.material_lead_days,
            dict(other.initial_accessory_inventory), other.accessory_cost_ratio)

    __hash__ = object.__hash__

    def _collect_problems(self) -> list[str]:
        errors: list[str] = []
        if not (isinstance(self.horizon_days, int) and self.horizon_days >= 1):
            errors.append("scenario: horizon_days must be an integer >= 1")
        if len(self.labor_rates) != 3:
            errors.append("scenario: labor_rates must have exactly 3 entries")
        elif any(r < 0 for r in self.labor_rates):
            errors.append("scenario: labor_rates must be >= 0")
        if not self.accessory_capacity_per_day >= 0:
            errors.append("scenario: accessory_capacity_per_day must be >= 0")
        if not (isinstance(self.material_lead_days, int) and self.material_lead_days >= 0):
            errors.append("scenario: material_lead_days must be an integer >= 0")
        if not self.accessory_cost_ratio >= 0:
            errors.append("scenario: accessory_cost_ratio must be >= 0")

        def dupes(items, kind):
            seen = set()
            for item in items:
                if item.id in seen:
                    errors.append(f"{kind} {item.id!r}: duplicate id")
                seen.add(item.id)
            return seen

        machine_ids = dupes(self.machines, "machine")
        mold_ids = dupes(self.molds, "mold")
        product_ids = dupes(self.products, "product")
        dupes(self.orders, "order")

        for m in self.machines:
            errors.extend(m.problems())
            if m.initial_mold is not None and m.initial_mold not in mold_ids:
                errors.append(f"machine {m.id!r}: initial_mold references unknown mold {m.initial_mold!r}")
        mold_by_id = {k.id: k for k in self.molds}
        for k in self.molds:
            if not k.compatible_machines:
                errors.append(f"mold {k.id!r}: compatible_machines must be non-empty")
            if not k.producible_products:
                errors.append(f"mold {k.id!r}: producible_products must be non-empty")
            for mid in sorted(k.compatible_machines - machine_ids):
                errors.append(f"mold {k.id!r}: compatible_machines references unknown machine {mid!r}")
            for fid in sorted(k.producible_products - product_ids):
                errors.append(f"mold {k.id!r}: producible_products references unknown product {fid!r}")
        for f in self.products:
            where = f"product {f.id!r}"
            if f.mold not in mold_ids:
                errors.append(f"{where}: mold references unknown mold {f.mold!r}")
            elif f.id not in mold_by_id[f.mold].producible_products:
                errors.append(f"{where}: not listed in producible_products of mold {f.mold!r}")
            if not f.unit_cost >= 0:
                errors.append(f"{where}: unit_cost must be >= 0")
            if not f.accessory_per_unit >= 0:
                errors.append(f"{where}: accessory_per_unit must be >= 0")
            if not f.big_m_cap > 0:
                errors.append(f"{where}: big_m_cap must be > 0")
            for mid, t in f.unit_time_overrides.items():
                if mid not in machine_ids:
                    errors.append(f"{where}: unit_time_overrides references unknown machine {mid!r}")
                if not t > 0:
                    errors.append(f"{where}: unit_time_overrides[{mid!r}] must be > 0")
        for o in self.orders:
            where = f"order {o.id!r}"
            if o.product not in product_ids:
                errors.append(f"{where}: product references unknown product {o.product!r}")
            if not o.quantity > 0:
                errors.append(f"{where}: quantity must be > 0")
            if not (isinstance(o.release_day, int) and o.release_day >= 1):
                errors.append(f"{where}: release_day must be an integer >= 1")
            if not isinstance(o.due_day, int) or o.due_day < o.release_day:
                errors.append(f"{where}: due_day must be an integer >= release_day")
            elif isinstance(self.horizon_days, int) and o.due_day > self.horizon_days:
                errors.append(f"{where}: due_day {o.due_day} exceeds horizon {self.horizon_days}")
            for name in ("unit_revenue", "unit_delay_penalty", "unit_outsourcing_cost"):
                if not getattr(o, name) >= 0:
                    errors.append(f"{where}: {name} must be >= 0")
        for fid, qty in self.initial_accessory_inventory.items():
            if fid not in product_ids:
                errors.append(f"initial_accessory_inventory references unknown product {fid!r}")
            if not qty >= 0:
                errors.append(f"initial_accessory_inventory[{fid!r}] must be >= 0")
        return errors

    # lookups

    def machine(self, machine_id: str) -> Machine:
        try:
            return self._machines[machine_id]
        except KeyError:
            raise UnknownId(f"unknown machine {machine_id!r}") from None

    def mold(self, mold_id: str) -> Mold:
        try:
            return self._molds[mold_id]
        except KeyError:
            raise UnknownId(f"unknown mold {mold_id!r}") from None

    def product(self, product_id: str) -> Product:
        try:
            return self._products[product_id]
        except KeyError:
            raise UnknownId(f"unknown product {product_id!r}") from None

    def order(self, order_id: str) -> Order:
        try:
            return self._orders[order_id]
        except KeyError:
            raise UnknownId(f"unknown order {order_id!r}") from None

    @property
    def days(self) -> range:
        return range(1, self.horizon_days + 1)

    @property
    def molding_machines(self) -> tuple[Machine, ...]:
        """Machines that can mount at least one mold."""
        mountable = set().union(*(k.compatible_machines for k in self.molds)) if self.molds else set()
        return tuple(m for m in self.machines if m.id in mountable)

    def groups(self) -> dict[str, list[Machine]]:
        out: dict[str, list[Machine]] = {}
        for m in self.machines:
            out.setdefault(m.group, []).append(m)
        return out

    def orders_of(self, product_id: str) -> list[Order]:
        return [o for o in self.orders if o.product == product_id]

    def machines_for(self, product_id: str) -> list[Machine]:
        mold = self.mold(self.product(product_id).mold)
        return [m for m in self.machines if m.id in mold.compatible_machines]

    @property
    def mean_labor_rate(self) -> float:
        return sum(self.labor_rates) / len(self.labor_rates)

    def accessory_unit_cost(self, product_id: str) -> float:
        return self.accessory_cost_ratio * self.product(product_id).unit_cost


def effective_capacity(machine: Machine, n_changeovers: float) -> float:
    """Hours left on a machine-day after ``n_changeovers`` mold swaps."""
    if n_changeovers < 0:
        raise ValueError("n_changeovers must be >= 0")
    return max(0.0, machine.day_hours - n_changeovers * machine.mold_change_hours)


def unit_time(machine: Machine, product: Product, scenario: Scenario | None = None) -> float:
    """Hours per unit of ``product`` on ``machine``.

    The mold check needs the scenario; without it only the override/default
    lookup is performed.
    """
    if scenario is not None:
        mold = scenario.mold(product.mold)
        if machine.id not in mold.compatible_machines:
            raise IncompatiblePair(
                f"product {product.id!r} (mold {product.mold!r}) cannot run on machine {machine.id!r}")
    return product.unit_time_overrides.get(machine.id, machine.unit_time_default)


def is_compatible(order: Order, machine: Machine, scenario: Scenario) -> bool:
    product = scenario.product(order.product)
    scenario.machine(machine.id)
    mold = scenario.mold(product.mold)
    return machine.id in mold.compatible_machines and product.id in mold.producible_products


def product_compatible(scenario: Scenario, product_id: str, machine_id: str) -> bool:
    product = scenario.product(product_id)
    return machine_id in scenario.mold(product.mold).compatible_machines


def default_big_m_cap(total_demand: float, machines: Iterable[Machine], unit_times: Iterable[float],
                      horizon: int) -> float:
    """Tightest valid cap: min(total demand, best daily output x horizon)."""
    best = max((math.floor(m.day_hours / t) for m, t in zip(machines, unit_times)), default=0)
    cap = min(total_demand, best * horizon)
    return float(cap) if cap > 0 else float(max(total_demand, 1.0))


def order_molds(molds: Iterable[str], previous: str | None) -> list[str]:
    """Run order for a machine-day: keep the mounted mold first, the rest by id."""
    rest = sorted(set(molds))
    if previous in rest:
        rest.remove(previous)
        return [previous] + rest
    return rest
