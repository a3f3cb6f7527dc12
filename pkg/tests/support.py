"""Seeded instance generators shared by the test modules."""

from __future__ import annotations

import math

import numpy as np

from mixplan.domain import (G150, Machine, Mold, Order, Product, Scenario, Scheme, SchemeConfig,
                            effective_capacity, order_molds)
from mixplan.milp import MilpModel
from mixplan.oracle import MicroMachine, MicroOrder
from mixplan.planner import PlanEnvelope
from mixplan.scheduler import MachineDay, day_changes


def random_milp(seed: int) -> MilpModel:
    """Bounded MILP with up to 10 variables, 10 rows and 8 discrete variables.

    Rows are drawn around a random point, so most instances are feasible;
    a few equality rows on all-discrete models make some infeasible.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 11))
    m = int(rng.integers(1, 11))
    nd = int(rng.integers(0, min(8, n) + 1))
    model = MilpModel(f"r{seed}")
    x0 = []
    for j in range(n):
        if j < nd:
            if rng.random() < 0.5:
                model.add_var(f"x{j}", 0, 1, "binary", float(rng.integers(-5, 10)))
                x0.append(float(rng.integers(0, 2)))
            else:
                lo = int(rng.integers(-2, 2))
                hi = lo + int(rng.integers(1, 4))
                model.add_var(f"x{j}", lo, hi, "integer", float(rng.integers(-5, 10)))
                x0.append(float(rng.integers(lo, hi + 1)))
        else:
            lo, hi = float(rng.integers(-3, 1)), float(rng.integers(1, 8))
            model.add_var(f"x{j}", lo, hi, "continuous", float(np.round(rng.normal(2, 3), 2)))
            x0.append(float(rng.uniform(lo, hi)))
    x0 = np.array(x0)
    for _ in range(m):
        k = int(rng.integers(1, n + 1))
        vs = rng.choice(n, k, replace=False)
        a = rng.integers(-6, 9, size=k).astype(float)
        coeffs = {f"x{j}": v for j, v in zip(vs, a)}
        lhs = float(a @ x0[vs])
        r = rng.random()
        if r < 0.6:
            model.add_constraint(coeffs, "<=", math.floor(lhs + rng.integers(0, 4)))
        elif r < 0.9:
            model.add_constraint(coeffs, ">=", math.ceil(lhs - rng.integers(0, 4)))
        elif nd == n:
            model.add_constraint(coeffs, "=", lhs)
        else:
            model.add_constraint(coeffs, "<=", lhs + 1)
    return model


UNIT_TIMES = (0.1, 0.2, 0.25, 0.3, 0.4, 0.5)


def _time(products, machine, product_id):
    f = next(p for p in products if p.id == product_id)
    return f.unit_time_overrides.get(machine.id, machine.unit_time_default)


def micro_instance(seed: int):
    """One scheduling day small enough for ``oracle.best_day_assignment``.

    Returns (scenario, envelope, prev, config, micro_orders, micro_machines).
    Planned production is whole units and fits the machine's effective
    capacity, as it does in any envelope the planner emits; order
    quantities may exceed it.
    Everything the daily heuristic sees (mounted molds, changeover losses,
    per-machine unit times, residual planned production) is mirrored into
    the oracle's inputs.
    """
    rng = np.random.default_rng(10_000 + seed)
    scheme = Scheme.B if rng.random() < 0.4 else Scheme.C
    config = SchemeConfig(scheme=scheme, max_molds_per_day=2)
    n_machines = int(rng.integers(1, 3))
    n_molds = int(rng.integers(1, 3))
    n_products = int(rng.integers(n_molds, 4))
    mids = [f"M{i + 1}" for i in range(n_machines)]
    kids = [f"K{i + 1}" for i in range(n_molds)]
    fids = [f"P{i + 1}" for i in range(n_products)]
    mold_of = {f: kids[i % n_molds] for i, f in enumerate(fids)}
    machines = []
    for mid in mids:
        initial = kids[int(rng.integers(0, n_molds))] if rng.random() < 0.7 else None
        machines.append(Machine(mid, G150, float(rng.choice(UNIT_TIMES)), day_hours=24.0,
                                mold_change_hours=5.0, initial_mold=initial))
    molds = [Mold(k, frozenset(mids), frozenset(f for f in fids if mold_of[f] == k)) for k in kids]
    products = []
    for f in fids:
        overrides = {m: float(rng.choice(UNIT_TIMES)) for m in mids if rng.random() < 0.5}
        products.append(Product(f, mold_of[f], 0.1, 1e4, unit_time_overrides=overrides))
    n_orders = int(rng.integers(1, 4))
    orders = [Order(f"O{i + 1}", fids[int(rng.integers(0, n_products))], int(rng.integers(5, 101)),
                    1, 1 + int(rng.integers(0, 3)), 1.0, float(rng.uniform(0.05, 0.2)), 0.8)
              for i in range(n_orders)]
    scenario = Scenario(3, machines, molds, products, orders, 1000.0, material_lead_days=0)

    x, y = {}, {}
    for mid in mids:
        if rng.random() < 0.1:
            continue  # idle machine
        count = 1 if scheme is Scheme.C else int(rng.integers(1, n_molds + 1))
        chosen = tuple(sorted(rng.choice(kids, count, replace=False).tolist()))
        x[(mid, 1)] = chosen
        for f in fids:
            if mold_of[f] in chosen:
                y[(mid, f, 1)] = float(rng.integers(0, 101))
    # an envelope never plans more machine-hours than the day leaves after changeovers
    for m in machines:
        held = x.get((m.id, 1), ())
        cap = effective_capacity(m, day_changes(order_molds(held, m.initial_mold), m.initial_mold))
        keys = [k for k in y if k[0] == m.id]
        hours = sum(y[k] * _time(products, m, k[1]) for k in keys)
        if hours > cap:
            for k in keys:
                y[k] = float(math.floor(y[k] * cap / hours))
    q = {(o.id, 1): float(o.quantity) for o in orders}
    env = PlanEnvelope((1, 1), y, q, x, {}, {}, {}, 0.0)
    prev = {m.id: MachineDay(m.initial_mold) for m in machines}

    micro_orders = [MicroOrder(o.id, o.product, int(o.quantity)) for o in orders]
    micro_machines = []
    for m in machines:
        held = x.get((m.id, 1), ())
        n = day_changes(order_molds(held, m.initial_mold), m.initial_mold)
        times = {f: _time(products, m, f) for f in fids if mold_of[f] in held}
        planned = {f: y[(m.id, f, 1)] for f in times}
        micro_machines.append(MicroMachine(m.id, effective_capacity(m, n), times, planned))
    return scenario, env, prev, config, micro_orders, micro_machines


def plant(orders, *, horizon=5, machines=("M1",), molds=None, lead=0, t=0.005, day_hours=24.0,
          acc_capacity=0.0, acc_per_unit=None, initial=None, unit_cost=0.1, inventory=None):
    """Hand-sized scenario.

    ``orders`` holds (id, product, quantity, release, due, revenue, penalty,
    outsourcing cost) tuples. ``molds`` maps mold id to its products and
    defaults to one mold per product, every mold fitting every machine.
    """
    products = sorted({o[1] for o in orders})
    molds = molds or {f"K{f}": [f] for f in products}
    acc_per_unit = acc_per_unit or {}
    initial = initial or {}
    ms = [Machine(m, G150, t, day_hours=day_hours, initial_mold=initial.get(m)) for m in machines]
    ks = [Mold(k, frozenset(machines), frozenset(fs)) for k, fs in molds.items()]
    mold_of = {f: k for k, fs in molds.items() for f in fs}
    fs = [Product(f, mold_of[f], unit_cost, 1e6, acc_per_unit.get(f, 0.0)) for f in products]
    os_ = [Order(*o) for o in orders]
    return Scenario(horizon, ms, ks, fs, os_, acc_capacity, material_lead_days=lead,
                    initial_accessory_inventory=inventory or {})
