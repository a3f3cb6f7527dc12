import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from envelope_check import envelope_residuals
from support import plant
from mixplan.domain import G130, G150, Scheme, SchemeConfig
from mixplan.errors import EmptyWindow, InconsistentState
from mixplan.fixtures import desk_scenario
from mixplan.milp import MilpLimits, solve_lp, solve_milp
from mixplan.planner import (RollingState, build_planning_model, envelope_from_values,
                             plan_windows, planning_scenario, rolling_plan, solve_window)
from mixplan.scenario_io import GeneratorSpec, generate_case_scenario

EXACT = MilpLimits(gap_tol=1e-9)
C = SchemeConfig(scheme=Scheme.C, solver_limits=EXACT)


def exact_envelope(scenario, config=C, window=None, state=None):
    pm = build_planning_model(scenario, window or (1, scenario.horizon_days), state, config)
    sol = solve_milp(pm.model, EXACT)
    return pm, sol, envelope_from_values(pm, sol.values, sol.status.value, sol.gap)


def test_single_order_hand_checkable():
    # 200 units/day on one machine, 100 units due by day 3
    s = plant([("O1", "P1", 100, 1, 3, 1.0, 0.1, 0.9)], horizon=3, t=24 / 200, initial={"M1": "KP1"})
    pm, sol, env = exact_envelope(s)
    assert sum(env.q.values()) == pytest.approx(100)
    assert env.outsourced["O1"] == 0
    assert env.objective == pytest.approx((1.0 - 0.1 - s.mean_labor_rate) * 100)
    relaxed = solve_lp(pm.model)
    assert relaxed.objective >= sol.objective - 1e-9


def test_order_outside_window_has_no_shipments():
    s = plant([("O1", "P1", 10, 1, 2, 1.0, 0.1, 0.9), ("O2", "P1", 10, 4, 5, 1.0, 0.1, 0.9)], horizon=5)
    pm = build_planning_model(s, (1, 2), None, C)
    assert {o for o, _d in pm.q} == {"O1"}


def test_unreachable_order_is_outsourced():
    # due before the material lead time ends: nothing can be made in time
    s = plant([("O1", "P1", 40, 1, 2, 1.0, 0.1, 0.6)], horizon=5, lead=3)
    _pm, _sol, env = exact_envelope(s)
    assert not env.q
    assert env.outsourced["O1"] == pytest.approx(40)


def test_unprofitable_demand_is_dropped():
    s = plant([("O1", "P1", 40, 1, 3, 0.05, 0.0, 0.5)], horizon=3, unit_cost=0.3)
    _pm, _sol, env = exact_envelope(s)
    assert sum(env.q.values()) == 0
    assert env.outsourced["O1"] == 0
    assert env.shortfall["O1"] == pytest.approx(40)


def test_scheme_a_pools_each_group():
    s = generate_case_scenario(GeneratorSpec(seed=0, n_products=8, n_orders=10, horizon_days=30))
    pooled = planning_scenario(s, Scheme.A)
    pools = {m.group: m for m in pooled.molding_machines}
    assert set(pools) == {G150, G130}
    assert pools[G150].day_hours == 8 * 24 and pools[G130].day_hours == 4 * 24
    assert pools[G150].mold_change_hours == 0
    assert planning_scenario(s, Scheme.C) is s


def test_windows_tile_the_horizon():
    assert plan_windows(30, SchemeConfig(window_days=30)) == [(1, 30, 30)]
    assert plan_windows(60, SchemeConfig(window_days=30)) == [(1, 30, 30), (31, 60, 60)]
    assert plan_windows(30, SchemeConfig(window_days=15, step_days=10)) == [
        (1, 15, 10), (11, 25, 20), (21, 30, 30)]


def test_bad_windows():
    s = plant([("O1", "P1", 10, 1, 2, 1.0, 0.1, 0.9)], horizon=5)
    with pytest.raises(EmptyWindow):
        build_planning_model(s, (3, 2), None, C)
    with pytest.raises(EmptyWindow):
        build_planning_model(s, (1, 9), None, C)


def test_inconsistent_state_rejected():
    s = plant([("O1", "P1", 10, 1, 2, 1.0, 0.1, 0.9)], horizon=5)
    with pytest.raises(InconsistentState):
        build_planning_model(s, (1, 5), RollingState(carried_inventory={"P1": -3}), C)
    with pytest.raises(InconsistentState):
        build_planning_model(s, (1, 5), RollingState(fulfilled_so_far={"O1": 50}), C)


def test_greedy_has_no_plan():
    with pytest.raises(ValueError):
        rolling_plan(desk_scenario(0), SchemeConfig(scheme=Scheme.GREEDY))


def test_single_window_equals_one_shot():
    s = plant([("O1", "P1", 300, 1, 4, 1.0, 0.1, 0.9), ("O2", "P2", 200, 2, 5, 1.2, 0.1, 0.9)],
              horizon=5, t=0.05)
    envs, _ = rolling_plan(s, replace(C, window_days=5, step_days=5))
    _pm, _sol, env = exact_envelope(s)
    assert len(envs) == 1
    assert envs[0].objective == pytest.approx(env.objective, abs=1e-6)


def test_inventory_hands_over_between_windows():
    orders = [("O1", "P1", 300, 1, 10, 1.0, 0.1, 0.9), ("O2", "P1", 400, 8, 14, 1.0, 0.1, 0.9)]
    s = plant(orders, horizon=14, t=0.05, acc_capacity=60.0, acc_per_unit={"P1": 1.0})
    cfg = replace(C, window_days=7, step_days=7)
    envs, state = rolling_plan(s, cfg)
    assert [e.window for e in envs] == [(1, 7), (8, 14)]
    # the second window starts from the first window's closing stock
    first_end = envs[0].inventory.get(("P1", 7), 0.0)
    need = sum(v for (o, d), v in envs[1].q.items() if d == 8)
    opening = envs[1].inventory.get(("P1", 8), 0.0) - envs[1].p.get(("P1", 8), 0.0) + need
    assert opening == pytest.approx(first_end, abs=1e-6)
    assert state.fulfilled_so_far["O1"] + state.committed_outsourcing.get("O1", 0.0) <= 300 + 1e-6
    assert max(envelope_residuals(envs, s, cfg).values()) <= 1e-6


def test_accessories_are_built_ahead_of_a_peak():
    # 600 accessories needed on days 4-5, CNC makes 200/day: must start early
    s = plant([("O1", "P1", 600, 4, 5, 1.0, 0.5, 0.95)], horizon=5, t=0.01,
              acc_capacity=200.0, acc_per_unit={"P1": 1.0})
    _pm, _sol, env = exact_envelope(s)
    assert sum(env.q.values()) == pytest.approx(600)
    assert sum(v for (f, d), v in env.p.items() if d < 4) > 0


def test_milp_objective_is_profit_minus_changeover_weight():
    s = desk_scenario(2, n_products=5, n_orders=6, horizon_days=8)
    cfg = SchemeConfig(scheme=Scheme.C, solver_limits=MilpLimits(max_nodes=50, gap_tol=1e-4))
    pm = build_planning_model(s, (1, 8), None, cfg)
    sol = solve_milp(pm.model, cfg.solver_limits, dive=pm.next_day_fixings)
    env = envelope_from_values(pm, sol.values)
    changes = sum(round(sol.values[v]) for v in pm.delta.values())
    assert sol.objective == pytest.approx(env.objective - cfg.changeover_weight * changes, abs=1e-6)


def small_instance(seed):
    rng = np.random.default_rng(seed)
    orders = []
    for i in range(int(rng.integers(1, 6))):
        r = int(rng.integers(1, 4))
        orders.append((f"O{i}", f"P{int(rng.integers(0, 3))}", float(rng.integers(50, 600)), r,
                       r + int(rng.integers(0, 3)), float(rng.uniform(0.4, 1.2)),
                       float(rng.uniform(0, 0.2)), float(rng.uniform(0.3, 1.3))))
    return plant(orders, horizon=5, machines=("M1", "M2")[:int(rng.integers(1, 3))],
                 t=float(rng.choice([0.02, 0.05, 0.08])))


@settings(max_examples=25)
@given(st.integers(0, 10_000))
def test_forbidding_outsourcing_never_helps(seed):
    s = small_instance(seed)
    pm, sol, _env = exact_envelope(s)
    for o, vid in pm.u.items():
        if sol.values[vid] > 1e-6:
            forced = build_planning_model(s, (1, s.horizon_days), None, C)
            forced.model.add_constraint({forced.u[o]: 1.0}, "<=", 0.0)
            again = solve_milp(forced.model, EXACT)
            assert again.objective <= sol.objective + 1e-6


@settings(max_examples=25)
@given(st.integers(0, 10_000))
def test_more_hours_never_lower_profit(seed):
    s = small_instance(seed)
    _pm, base, _ = exact_envelope(s)
    bigger = replace(s, machines=tuple(replace(m, day_hours=m.day_hours * 1.5) for m in s.machines))
    _pm, more, _ = exact_envelope(bigger)
    assert more.objective >= base.objective - 1e-6


@settings(max_examples=25)
@given(st.integers(0, 10_000))
def test_small_envelopes_recompute_clean(seed):
    s = small_instance(seed)
    for scheme in (Scheme.A, Scheme.B, Scheme.C):
        cfg = SchemeConfig(scheme=scheme, max_molds_per_day=2, window_days=3, step_days=2,
                           solver_limits=MilpLimits(max_nodes=20, gap_tol=1e-6, max_moves=30))
        envs, _ = rolling_plan(s, cfg)
        res = envelope_residuals(envs, s, cfg)
        assert max(res.values()) <= 1e-6, res


@pytest.mark.slow
@settings(max_examples=4)
@given(st.integers(100, 10_000), st.sampled_from([Scheme.B, Scheme.C]))
def test_mold_exclusivity_on_desk_scenarios(seed, scheme):
    s = desk_scenario(seed, horizon_days=12)
    cfg = SchemeConfig(scheme=scheme, window_days=6,
                       solver_limits=MilpLimits(max_nodes=3, gap_tol=1e-3, max_moves=20))
    envs, _ = rolling_plan(s, cfg)
    limit = 1 if scheme is Scheme.C else cfg.max_molds_per_day
    assert all(len(molds) <= limit for env in envs for molds in env.x.values())
    for env in envs:
        assert sum(env.q.values()) >= 0
        for o, u in env.outsourced.items():
            assert u <= s.order(o).quantity + 1e-6


def test_solve_window_envelope_is_frozen_part_only():
    s = plant([("O1", "P1", 100, 1, 5, 1.0, 0.1, 0.9)], horizon=6, t=0.1)
    pm = build_planning_model(s, (1, 6), None, C, frozen_end=3)
    env = solve_window(pm)
    assert env.window == (1, 3)
    assert all(d <= 3 for (_o, d) in env.q)
    assert math.isfinite(env.objective)
