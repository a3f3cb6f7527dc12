"""Scenario files, the case-plant generator, and result serialization.

Every format is versioned through a ``format_version`` field (JSON files)
or a sibling JSON file (schedule CSVs). Layouts are documented in
``docs/formats.md``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Any, Iterable

import numpy as np

from .domain import CNC, G130, G150, Machine, Mold, Order, Product, Scenario
from .errors import InfeasibleSpec, ParseError, ValidationError, VersionMismatch

FORMAT_VERSION = 1

# case-plant fleet: daily output per machine at the standard unit time
G150_DAILY_UNITS = 4800
G130_DAILY_UNITS = 3000
CNC_DAILY_UNITS = 3000  # midpoint of the plant's 2,000-4,000 units per day
FLEET = {G150: 8, G130: 4, CNC: 2}
MOLD_CHANGE_HOURS = 5.0
LABOR_RATES = (0.10, 0.12, 0.15)
LEAD_DAYS = 3

# Monetary draws (CNY per unit). Shell cost is chosen so material and labour
# are of similar size, as in the plant's cost breakdown.
UNIT_COST_RANGE = (0.10, 0.16)
MARKUP_RANGE = (1.25, 1.45)  # revenue / (unit cost + mean piece rate)
OUTSOURCE_POSITION = (0.3, 0.8)  # where gamma sits between internal cost and revenue
PENALTY_RANGE = (0.05, 0.20)
ACCESSORY_COST_RATIO = 0.2
ACCESSORY_LOAD_CAP = 0.6  # max average accessory need as a share of the CNC pool


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


# scenario files

def _scenario_dict(s: Scenario) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "horizon_days": s.horizon_days,
        "material_lead_days": s.material_lead_days,
        "accessory_capacity_per_day": s.accessory_capacity_per_day,
        "accessory_cost_ratio": s.accessory_cost_ratio,
        "labor_rates": list(s.labor_rates),
        "initial_accessory_inventory": dict(sorted(s.initial_accessory_inventory.items())),
        "machines": [
            {"id": m.id, "group": m.group, "day_hours": m.day_hours,
             "mold_change_hours": m.mold_change_hours, "unit_time_default": m.unit_time_default,
             "initial_mold": m.initial_mold}
            for m in s.machines
        ],
        "molds": [
            {"id": k.id, "compatible_machines": sorted(k.compatible_machines),
             "producible_products": sorted(k.producible_products)}
            for k in s.molds
        ],
        "products": [
            {"id": f.id, "mold": f.mold, "unit_cost": f.unit_cost,
             "accessory_per_unit": f.accessory_per_unit, "big_m_cap": f.big_m_cap,
             "unit_time_overrides": dict(sorted(f.unit_time_overrides.items()))}
            for f in s.products
        ],
        "orders": [
            {"id": o.id, "product": o.product, "quantity": o.quantity,
             "release_day": o.release_day, "due_day": o.due_day, "unit_revenue": o.unit_revenue,
             "unit_delay_penalty": o.unit_delay_penalty,
             "unit_outsourcing_cost": o.unit_outsourcing_cost}
            for o in s.orders
        ],
    }


def dumps_scenario(scenario: Scenario) -> str:
    return json.dumps(_scenario_dict(scenario), indent=2) + "\n"


def save_scenario(scenario: Scenario, path: str | os.PathLike) -> None:
    _atomic_write(path, dumps_scenario(scenario))


def _parse_json(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None


def _read_text(source: str | os.PathLike | bytes | IO) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if hasattr(source, "read"):
        data = source.read()
        return data.decode("utf-8") if isinstance(data, bytes) else data
    return Path(source).read_text(encoding="utf-8")


class _Fields:
    """Typed field access that records problems instead of raising."""

    def __init__(self, errors: list[str]):
        self.errors = errors

    def get(self, obj: dict, key: str, where: str, kind, default=..., optional=False):
        if not isinstance(obj, dict):
            self.errors.append(f"{where}: expected an object")
            return None
        if key not in obj or (optional and obj[key] is None):
            if default is not ...:
                return default
            if optional:
                return None
            self.errors.append(f"{where}.{key}: missing")
            return None
        value = obj[key]
        if kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                self.errors.append(f"{where}.{key}: expected a number")
                return None
            return float(value)
        if kind is int:
            if isinstance(value, bool) or not (isinstance(value, int) or
                                               (isinstance(value, float) and value.is_integer())):
                self.errors.append(f"{where}.{key}: expected an integer")
                return None
            return int(value)
        if kind is str:
            if not isinstance(value, str):
                self.errors.append(f"{where}.{key}: expected a string")
                return None
            return value
        if kind is list:
            if not isinstance(value, list):
                self.errors.append(f"{where}.{key}: expected an array")
                return None
            return value
        if kind is dict:
            if not isinstance(value, dict):
                self.errors.append(f"{where}.{key}: expected an object")
                return None
            return value
        raise TypeError(kind)


def scenario_from_dict(data: Any) -> Scenario:
    errors: list[str] = []
    F = _Fields(errors)
    if not isinstance(data, dict):
        raise ValidationError(["scenario: top level must be an object"])
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"scenario format_version {version!r} is not {FORMAT_VERSION}")

    def items(key):
        value = F.get(data, key, "scenario", list)
        return value or []

    machines = []
    for i, m in enumerate(items("machines")):
        w = f"machines[{i}]"
        vals = dict(
            id=F.get(m, "id", w, str), group=F.get(m, "group", w, str),
            unit_time_default=F.get(m, "unit_time_default", w, float),
            day_hours=F.get(m, "day_hours", w, float, 24.0),
            mold_change_hours=F.get(m, "mold_change_hours", w, float, 5.0),
            initial_mold=F.get(m, "initial_mold", w, str, optional=True),
        )
        if None not in (vals["id"], vals["group"], vals["unit_time_default"]):
            machines.append(Machine(**vals))
    molds = []
    for i, k in enumerate(items("molds")):
        w = f"molds[{i}]"
        mid = F.get(k, "id", w, str)
        cm = F.get(k, "compatible_machines", w, list)
        pp = F.get(k, "producible_products", w, list)
        if mid is not None and cm is not None and pp is not None:
            molds.append(Mold(mid, frozenset(map(str, cm)), frozenset(map(str, pp))))
    products = []
    for i, f in enumerate(items("products")):
        w = f"products[{i}]"
        vals = dict(
            id=F.get(f, "id", w, str), mold=F.get(f, "mold", w, str),
            unit_cost=F.get(f, "unit_cost", w, float),
            big_m_cap=F.get(f, "big_m_cap", w, float),
            accessory_per_unit=F.get(f, "accessory_per_unit", w, float, 0.0),
            unit_time_overrides=F.get(f, "unit_time_overrides", w, dict, {}),
        )
        if None not in vals.values():
            overrides = {}
            for mid, t in vals["unit_time_overrides"].items():
                if isinstance(t, bool) or not isinstance(t, (int, float)):
                    errors.append(f"{w}.unit_time_overrides.{mid}: expected a number")
                else:
                    overrides[str(mid)] = float(t)
            vals["unit_time_overrides"] = overrides
            products.append(Product(**vals))
    orders = []
    for i, o in enumerate(items("orders")):
        w = f"orders[{i}]"
        vals = dict(
            id=F.get(o, "id", w, str), product=F.get(o, "product", w, str),
            quantity=F.get(o, "quantity", w, float),
            release_day=F.get(o, "release_day", w, int), due_day=F.get(o, "due_day", w, int),
            unit_revenue=F.get(o, "unit_revenue", w, float),
            unit_delay_penalty=F.get(o, "unit_delay_penalty", w, float),
            unit_outsourcing_cost=F.get(o, "unit_outsourcing_cost", w, float),
        )
        if None not in vals.values():
            orders.append(Order(**vals))
    horizon = F.get(data, "horizon_days", "scenario", int)
    acc_cap = F.get(data, "accessory_capacity_per_day", "scenario", float)
    rates = F.get(data, "labor_rates", "scenario", list, list(LABOR_RATES))
    lead = F.get(data, "material_lead_days", "scenario", int, LEAD_DAYS)
    ratio = F.get(data, "accessory_cost_ratio", "scenario", float, 0.0)
    inventory = F.get(data, "initial_accessory_inventory", "scenario", dict, {})
    if rates is not None and not all(isinstance(r, (int, float)) and not isinstance(r, bool) for r in rates):
        errors.append("scenario.labor_rates: expected numbers")
        rates = None
    if errors:
        raise ValidationError(errors)
    return Scenario(
        horizon_days=horizon, machines=machines, molds=molds, products=products, orders=orders,
        accessory_capacity_per_day=acc_cap, labor_rates=tuple(float(r) for r in rates),
        material_lead_days=lead, accessory_cost_ratio=ratio,
        initial_accessory_inventory={str(k): float(v) for k, v in inventory.items()},
    )


def load_scenario(source: str | os.PathLike | bytes | IO) -> Scenario:
    """Parse and fully validate a scenario file (path, bytes or open stream)."""
    return scenario_from_dict(_parse_json(_read_text(source)))


# generator

@dataclass(frozen=True)
class GeneratorSpec:
    seed: int = 0
    scale: float = 1.0
    n_products: int = 37
    n_orders: int = 150
    horizon_days: int = 240
    demand_total: float | None = None  # None: the plant's 8.3M units, scaled by fleet and horizon
    due_clustering: float = 0.5
    accessory_fraction: float = 0.2
    adapters: int | None = None  # G150 machines able to mount GT130 molds; None: round(2 * scale)
    min_window_days: int = 3
    max_window_days: int = 12

    def validate(self):
        problems = []
        for name in ("n_products", "n_orders", "horizon_days"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1")
        for name in ("due_clustering", "accessory_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                problems.append(f"{name} must lie in [0, 1]")
        if not self.scale >= 0:
            problems.append("scale must be >= 0")
        if self.demand_total is not None and not self.demand_total > 0:
            problems.append("demand_total must be > 0")
        if not 1 <= self.min_window_days <= self.max_window_days:
            problems.append("need 1 <= min_window_days <= max_window_days")
        if problems:
            raise InfeasibleSpec("; ".join(problems))


def fleet_size(scale: float) -> dict[str, int]:
    return {g: round_half_up(n * scale) for g, n in FLEET.items()}


def generate_case_scenario(spec: GeneratorSpec) -> Scenario:
    """Synthetic plant in the shape of the case study, fully determined by ``spec``."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    H = spec.horizon_days
    lead = LEAD_DAYS
    if H < lead + spec.min_window_days:
        raise InfeasibleSpec(f"horizon {H} leaves no production window after the {lead}-day lead time")
    fleet = fleet_size(spec.scale)
    n150, n130, ncnc = fleet[G150], fleet[G130], fleet[CNC]
    if n150 == 0:
        raise InfeasibleSpec(f"scale {spec.scale} leaves no G150 machines")
    adapters = round_half_up(2 * spec.scale) if spec.adapters is None else spec.adapters
    adapters = max(0, min(adapters, n150))
    if n130 == 0 and adapters == 0:
        adapters = 1

    machines = []
    g150_ids = [f"G150-{i + 1:02d}" for i in range(n150)]
    g130_ids = [f"G130-{i + 1:02d}" for i in range(n130)]
    cnc_ids = [f"CNC-{i + 1:02d}" for i in range(ncnc)]
    for mid in g150_ids:
        machines.append(Machine(mid, G150, 24.0 / G150_DAILY_UNITS, 24.0, MOLD_CHANGE_HOURS))
    for mid in g130_ids:
        machines.append(Machine(mid, G130, 24.0 / G130_DAILY_UNITS, 24.0, MOLD_CHANGE_HOURS))
    for mid in cnc_ids:
        machines.append(Machine(mid, CNC, 24.0 / CNC_DAILY_UNITS, 24.0, 0.0))
    adapter_ids = g150_ids[:adapters]

    # product families split by machine-group capacity
    cap150 = n150 * G150_DAILY_UNITS
    cap130 = n130 * G130_DAILY_UNITS + adapters * G150_DAILY_UNITS * 0.5
    share130 = cap130 / (cap150 + cap130)
    n_gt130 = min(spec.n_products - 1, max(1, round_half_up(spec.n_products * share130))) \
        if spec.n_products > 1 else 0
    n_gt150 = spec.n_products - n_gt130
    kinds = [G150] * n_gt150 + [G130] * n_gt130

    daily_capacity = {G150: cap150 - adapters * G150_DAILY_UNITS * 0.5, G130: cap130}
    if spec.demand_total is None:
        demand_total = 8.3e6 * spec.scale * H / 240.0
    else:
        demand_total = float(spec.demand_total)

    # order windows, with due dates pulled toward month ends
    first = lead + 1
    product_of = []
    for i in range(spec.n_orders):
        product_of.append(i % spec.n_products if i < spec.n_products else int(rng.integers(spec.n_products)))
    windows = []
    for i in range(spec.n_orders):
        span_max = min(spec.max_window_days, H - first + 1)
        span = int(rng.integers(spec.min_window_days, span_max + 1))
        if rng.random() < spec.due_clustering:
            month_ends = [d for d in range(30, H + 1, 30)] or [H]
            due = int(rng.choice(month_ends)) - int(rng.integers(0, 5))
        else:
            due = int(rng.integers(first + span - 1, H + 1))
        due = min(max(due, first + span - 1), H)
        windows.append((due - span + 1, due))

    weights = np.array([(w[1] - w[0] + 1) * rng.uniform(0.5, 1.5) for w in windows])
    kind_of_order = [kinds[p] for p in product_of]
    quantities = np.zeros(spec.n_orders)
    cap_total = sum(daily_capacity[k] for k in set(kind_of_order))
    for kind in (G150, G130):
        idx = [i for i, k in enumerate(kind_of_order) if k == kind]
        if not idx:
            continue
        share = daily_capacity[kind] / cap_total
        w = weights[idx]
        quantities[idx] = demand_total * share * w / w.sum()
    quantities = np.maximum(np.round(quantities), 1.0)
    quantities[-1] = max(1.0, quantities[-1] + round(demand_total) - quantities.sum())

    # accessories: a subset of products needs rings and/or stands
    n_acc = round_half_up(spec.n_products * spec.accessory_fraction) if ncnc else 0
    acc_products = set(rng.choice(spec.n_products, size=n_acc, replace=False).tolist()) if n_acc else set()
    per_unit = {p: (float(rng.choice([1.0, 1.0, 2.0])) if p in acc_products else 0.0)
                for p in range(spec.n_products)}
    pool = ncnc * CNC_DAILY_UNITS
    prod_demand = np.zeros(spec.n_products)
    for i, p in enumerate(product_of):
        prod_demand[p] += quantities[i]
    limit = ACCESSORY_LOAD_CAP * pool * (H - lead)
    for p in sorted(acc_products, key=lambda p: (-prod_demand[p], p)):
        if sum(per_unit[q] * prod_demand[q] for q in acc_products) <= limit:
            break
        per_unit[p] = 0.0

    unit_cost = np.round(rng.uniform(*UNIT_COST_RANGE, size=spec.n_products), 4)
    mean_rate = sum(LABOR_RATES) / 3
    products, molds = [], []
    for p in range(spec.n_products):
        pid, kid = f"P{p + 1:02d}", f"K{p + 1:02d}"
        compat = g150_ids if kinds[p] == G150 else g130_ids + adapter_ids
        molds.append(Mold(kid, frozenset(compat), frozenset([pid])))
        best_daily = max(math.floor(24.0 / (24.0 / (G150_DAILY_UNITS if m.startswith("G150")
                                                      else G130_DAILY_UNITS))) for m in compat)
        cap = min(prod_demand[p], best_daily * H) if prod_demand[p] > 0 else best_daily * H
        products.append(Product(pid, kid, float(unit_cost[p]), float(max(cap, 1.0)), per_unit[p]))

    orders = []
    for i in range(spec.n_orders):
        p = product_of[i]
        base = unit_cost[p] + mean_rate
        revenue = round(base * rng.uniform(*MARKUP_RANGE), 4)
        gamma = round(base + rng.uniform(*OUTSOURCE_POSITION) * (revenue - base), 4)
        penalty = round(rng.uniform(*PENALTY_RANGE), 4)
        orders.append(Order(f"O{i + 1:03d}", f"P{p + 1:02d}", float(quantities[i]), windows[i][0],
                            windows[i][1], revenue, penalty, gamma))

    return Scenario(
        horizon_days=H, machines=machines, molds=molds, products=products, orders=orders,
        accessory_capacity_per_day=float(pool), labor_rates=LABOR_RATES, material_lead_days=lead,
        initial_accessory_inventory={}, accessory_cost_ratio=ACCESSORY_COST_RATIO,
    )


# result artifacts

SCHEDULE_COLUMNS = ("order", "machine", "day", "units")
CHANGEOVER_COLUMNS = ("machine", "day", "from", "to", "hours")


def _artifact(text: str, kind: str) -> dict:
    data = _parse_json(text)
    if not isinstance(data, dict):
        raise ParseError(f"{kind} file must hold a JSON object")
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"{kind} format_version {version!r}, this build reads {FORMAT_VERSION}")
    if data.get("kind") != kind:
        raise ParseError(f"expected a {kind} file, found kind {data.get('kind')!r}")
    return data


def _rows(data: dict, key: str, kind: str) -> list:
    rows = data.get(key, [])
    if not isinstance(rows, list):
        raise ParseError(f"{kind}: {key!r} must be a list")
    return rows


def _keyed(rows, width: int, where: str, value=float) -> dict:
    out = {}
    for row in rows:
        if not isinstance(row, list) or len(row) != width + 1:
            raise ParseError(f"{where}: malformed entry {row!r}")
        key = tuple(int(v) if isinstance(v, int) else str(v) for v in row[:width])
        out[key] = value(row[width])
    return out


def _flat(mapping) -> list:
    return [[*k, v] for k, v in sorted(mapping.items())]


def _envelope_dict(env) -> dict:
    return {
        "window": list(env.window),
        "status": env.status,
        "gap": env.gap,
        "objective": env.objective,
        "x": [[m, d, list(molds)] for (m, d), molds in sorted(env.x.items())],
        "y": _flat(env.y),
        "q": _flat(env.q),
        "p": _flat(env.p),
        "inventory": _flat(env.inventory),
        "outsourced": dict(sorted(env.outsourced.items())),
        "shortfall": dict(sorted(env.shortfall.items())),
    }


def dumps_envelopes(envelopes) -> str:
    data = {"format_version": FORMAT_VERSION, "kind": "envelopes",
            "envelopes": [_envelope_dict(e) for e in envelopes]}
    return json.dumps(data, indent=1) + "\n"


def save_envelopes(envelopes, path: str | os.PathLike) -> None:
    _atomic_write(path, dumps_envelopes(envelopes))


def load_envelopes(source: str | os.PathLike | bytes | IO) -> list:
    from .planner import PlanEnvelope

    data = _artifact(_read_text(source), "envelopes")
    out = []
    for i, e in enumerate(_rows(data, "envelopes", "envelopes")):
        where = f"envelope {i}"
        try:
            window = tuple(int(v) for v in e["window"])
            x = _keyed(e["x"], 2, where, value=lambda v: tuple(str(k) for k in v))
            out.append(PlanEnvelope(
                window=window, y=_keyed(e["y"], 3, where), q=_keyed(e["q"], 2, where), x=x,
                p=_keyed(e["p"], 2, where), inventory=_keyed(e["inventory"], 2, where),
                outsourced={str(k): float(v) for k, v in e["outsourced"].items()},
                objective=float(e["objective"]),
                shortfall={str(k): float(v) for k, v in e["shortfall"].items()},
                status=str(e["status"]), gap=float(e["gap"])))
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ParseError(f"{where}: {exc!r}") from None
    return out


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def schedule_files(path: str | os.PathLike) -> tuple[Path, Path, Path]:
    """(allocations CSV, changeovers CSV, metadata JSON) for a schedule path.

    ``path`` may name the directory or the allocations CSV; the other two
    files sit next to it as ``changeovers.csv`` and ``schedule.json``.
    """
    path = Path(path)
    if path.suffix.lower() == ".csv":
        base = path.parent
        return path, base / "changeovers.csv", base / "schedule.json"
    return path / "schedule.csv", path / "changeovers.csv", path / "schedule.json"


def dumps_schedule(schedule) -> tuple[str, str, str]:
    alloc = _csv_text(SCHEDULE_COLUMNS,
                      [[o, m, d, repr(float(v))] for (o, m, d), v in sorted(schedule.z.items())])
    changes = _csv_text(CHANGEOVER_COLUMNS,
                        [[c.machine, c.day, c.from_mold or "", c.to_mold, repr(float(c.hours))]
                         for c in schedule.changeovers])
    meta = {
        "format_version": FORMAT_VERSION, "kind": "schedule", "scheme": schedule.scheme,
        "initial_molds": dict(sorted(schedule.initial_molds.items())),
        "mold_state": [[m, d, list(ks)] for (m, d), ks in sorted(schedule.mold_state.items())],
        "unassigned": _flat(schedule.unassigned),
        "accessory": _flat(schedule.accessory),
        "outsourced": dict(sorted(schedule.outsourced.items())),
    }
    return alloc, changes, json.dumps(meta, indent=1) + "\n"


def save_schedule(schedule, path: str | os.PathLike) -> None:
    texts = dumps_schedule(schedule)
    for target, text in zip(schedule_files(path), texts):
        _atomic_write(target, text)


def _read_csv(text: str, header: tuple, where: str) -> list[list[str]]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != header:
        raise ParseError(f"{where}: header must be {','.join(header)}", 1, 1)
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(f"{where}: expected {len(header)} fields, found {len(row)}", n, 1)
    return rows[1:]


def load_schedule(path: str | os.PathLike):
    """Read a schedule written by :func:`save_schedule`.

    The changeovers CSV and metadata file are optional: without them the
    schedule carries only its allocations (and scheme C by default).
    """
    from .scheduler import Changeover, Schedule

    alloc_path, change_path, meta_path = schedule_files(path)
    out = Schedule()
    if meta_path.exists():
        meta = _artifact(meta_path.read_text(encoding="utf-8"), "schedule")
        try:
            out.scheme = str(meta["scheme"])
            out.initial_molds = {str(k): (None if v is None else str(v))
                                 for k, v in meta["initial_molds"].items()}
            out.mold_state = _keyed(meta["mold_state"], 2, "schedule.json",
                                    value=lambda v: tuple(str(k) for k in v))
            out.unassigned = _keyed(meta["unassigned"], 2, "schedule.json")
            out.accessory = _keyed(meta["accessory"], 2, "schedule.json")
            out.outsourced = {str(k): float(v) for k, v in meta["outsourced"].items()}
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ParseError(f"schedule.json: {exc!r}") from None
    for n, (o, m, d, v) in enumerate(_read_csv(alloc_path.read_text(encoding="utf-8"),
                                               SCHEDULE_COLUMNS, alloc_path.name), start=2):
        try:
            out.z[(o, m, int(d))] = out.z.get((o, m, int(d)), 0.0) + float(v)
        except ValueError:
            raise ParseError(f"{alloc_path.name}: bad number", n, 1) from None
    if change_path.exists():
        for n, (m, d, a, b, h) in enumerate(_read_csv(change_path.read_text(encoding="utf-8"),
                                                      CHANGEOVER_COLUMNS, change_path.name), start=2):
            try:
                out.changeovers.append(Changeover(m, int(d), a or None, b, float(h)))
            except ValueError:
                raise ParseError(f"{change_path.name}: bad number", n, 1) from None
    return out


def dumps_report(report) -> str:
    data = {"format_version": FORMAT_VERSION, "kind": "report", **report.to_dict()}
    return json.dumps(data, indent=1, sort_keys=True) + "\n"


def save_report(report, path: str | os.PathLike) -> None:
    _atomic_write(path, dumps_report(report))


def load_report(source: str | os.PathLike | bytes | IO):
    from .metrics import EvaluationReport, GroupChangeovers

    data = _artifact(_read_text(source), "report")
    data = {k: v for k, v in data.items() if k not in ("format_version", "kind")}
    try:
        data["changeover_table"] = {g: GroupChangeovers(**c)
                                    for g, c in data["changeover_table"].items()}
        return EvaluationReport(**data)
    except (KeyError, TypeError, AttributeError) as exc:
        raise ParseError(f"report: {exc!r}") from None


# atomic writes

def _atomic_write(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)
