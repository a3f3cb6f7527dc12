import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from support import micro_instance, plant
from mixplan.domain import Scheme, SchemeConfig
from mixplan.errors import EnvelopeDayMissing
from mixplan.fixtures import desk_scenario
from mixplan.metrics import on_time_delivery
from mixplan.milp import MilpLimits
from mixplan.planner import PlanEnvelope, rolling_plan
from mixplan.scheduler import (Changeover, MachineDay, Schedule, greedy_noplan, mold_change_count,
                               schedule_day, schedule_horizon, verify_schedule)

C = SchemeConfig(scheme=Scheme.C)
B = SchemeConfig(scheme=Scheme.B, max_molds_per_day=3)


def envelope(window, y=None, q=None, x=None):
    return PlanEnvelope(window, y or {}, q or {}, x or {}, {}, {}, {}, 0.0)


def one_order(qty=50, **kw):
    return plant([("O1", "P1", qty, 1, 5, 1.0, 0.1, 0.9)], **kw)


def test_single_order_single_machine():
    s = one_order()
    env = envelope((1, 1), {("M1", "P1", 1): 50.0}, {("O1", 1): 50.0}, {("M1", 1): ("KP1",)})
    day = schedule_day(env, 1, {}, s, C)
    assert day.z == {("O1", "M1", 1): 50.0}
    assert 50 * 0.005 == pytest.approx(0.25)
    assert [c.hours for c in day.changeovers] == [5.0]  # first mount on an empty machine
    assert not day.unassigned
    assert day.after["M1"] == MachineDay("KP1", frozenset({"P1"}))


def test_stable_machine_preferred_over_roomier_one():
    s = plant([("O1", "P1", 10, 1, 5, 1.0, 0.1, 0.9), ("O2", "P2", 10, 1, 5, 1.0, 0.1, 0.9)],
              machines=("M1", "M2"))
    prev = {"M1": MachineDay("KP1", frozenset({"P1"})), "M2": MachineDay("KP1", frozenset())}
    env = envelope((2, 2), {("M1", "P1", 2): 10.0, ("M2", "P1", 2): 10.0, ("M1", "P2", 2): 5.0},
                   {("O1", 2): 10.0}, {("M1", 2): ("KP1", "KP2"), ("M2", 2): ("KP1",)})
    day = schedule_day(env, 2, prev, s, B)
    # M1 lost 5h to the KP2 switch, M2 kept all 24h, yet M1 ran P1 yesterday
    assert day.z == {("O1", "M1", 2): 10.0}


def test_shortage_recorded_as_unassigned():
    s = one_order(qty=6000)
    env = envelope((1, 1), {("M1", "P1", 1): 6000.0}, {("O1", 1): 6000.0}, {("M1", 1): ("KP1",)})
    day = schedule_day(env, 1, {}, s, C)
    made = day.z[("O1", "M1", 1)]
    assert made == pytest.approx(19 / 0.005)
    assert day.unassigned[("O1", 1)] == pytest.approx(6000 - made)


def test_uncovered_day_raises():
    with pytest.raises(EnvelopeDayMissing):
        schedule_day(envelope((1, 3)), 4, {}, one_order(), C)
    with pytest.raises(EnvelopeDayMissing):
        schedule_horizon([envelope((1, 3))], one_order(), C)


def test_same_mold_all_week_changes_once():
    s = one_order(qty=500, initial={"M1": "KP1"})
    x = {("M1", d): ("KP1",) for d in range(1, 6)}
    y = {("M1", "P1", d): 100.0 for d in range(1, 6)}
    q = {("O1", d): 100.0 for d in range(1, 6)}
    sched = schedule_horizon([envelope((1, 5), y, q, x)], s, C)
    assert sched.changeovers == []
    assert sum(sched.z.values()) == pytest.approx(500)


def test_mold_swap_costs_five_hours():
    s = plant([("O1", "P1", 10, 1, 5, 1.0, 0.1, 0.9), ("O2", "P2", 10, 1, 5, 1.0, 0.1, 0.9)],
              initial={"M1": "KP1"})
    env = envelope((1, 5), {("M1", "P1", 1): 10.0, ("M1", "P2", 2): 10.0},
                   {("O1", 1): 10.0, ("O2", 2): 10.0}, {("M1", 1): ("KP1",), ("M1", 2): ("KP2",)})
    sched = schedule_horizon([env], s, C)
    assert sched.changeovers == [Changeover("M1", 2, "KP1", "KP2", 5.0)]
    assert verify_schedule(sched, [env], s, C) == []


def test_scheme_b_counts_intra_day_switches():
    s = plant([(f"O{i}", f"P{i}", 10, 1, 5, 1.0, 0.1, 0.9) for i in (1, 2, 3)], initial={"M1": "KP1"})
    sched = Schedule(scheme="B", initial_molds={"M1": "KP1"})
    sched.mold_state[("M1", 1)] = ("KP1", "KP2", "KP3")
    assert mold_change_count(sched, "M1", 1) == 2
    sched = Schedule(scheme="C", initial_molds={"M1": "KP1"})
    sched.mold_state[("M1", 1)] = ("KP1",)
    sched.mold_state[("M1", 2)] = ("KP2",)
    assert mold_change_count(sched, "M1", 1) == 0
    assert mold_change_count(sched, "M1", 2) == 1
    assert mold_change_count(sched, "M1", 3) == 0
    assert s.machine("M1").initial_mold == "KP1"


def clean_run():
    s = one_order(qty=200, initial={"M1": "KP1"})
    env = envelope((1, 5), {("M1", "P1", 1): 200.0}, {("O1", 1): 200.0}, {("M1", 1): ("KP1",)})
    return s, env, schedule_horizon([env], s, C)


def test_clean_schedule_verifies():
    s, env, sched = clean_run()
    assert verify_schedule(sched, [env], s, C) == []


def test_capacity_overrun_reported_once():
    s, env, sched = clean_run()
    sched.z[("O1", "M1", 1)] = (24 + 1) / 0.005  # one hour past the day
    env = envelope((1, 5), {("M1", "P1", 1): 5000.0}, {("O1", 1): 5000.0}, {("M1", 1): ("KP1",)})
    found = verify_schedule(sched, [env], s, C)
    assert [v.rule for v in found] == ["capacity"]
    assert found[0].residual == pytest.approx(1.0)


def test_inflated_units_break_the_plan():
    s, env, sched = clean_run()
    sched.z[("O1", "M1", 1)] += 10
    rules = {v.rule for v in verify_schedule(sched, [env], s, C)}
    assert {"shipments", "production"} <= rules


def test_unmounted_mold_is_a_violation():
    s = plant([("O1", "P1", 10, 1, 5, 1.0, 0.1, 0.9)], machines=("M1", "M2"), initial={"M1": "KP1"})
    sched = Schedule(scheme="C", initial_molds={"M1": "KP1", "M2": None})
    sched.z[("O1", "M2", 1)] = 10.0
    assert "mold" in {v.rule for v in verify_schedule(sched, None, s, C)}


def test_allocation_outside_order_window():
    s = plant([("O1", "P1", 10, 2, 3, 1.0, 0.1, 0.9)], initial={"M1": "KP1"})
    sched = Schedule(scheme="C", initial_molds={"M1": "KP1"})
    sched.z[("O1", "M1", 4)] = 10.0
    sched.mold_state[("M1", 4)] = ("KP1",)
    assert "window" in {v.rule for v in verify_schedule(sched, None, s, C)}


def test_recorded_changeovers_must_match_mold_states():
    s, env, sched = clean_run()
    sched.changeovers.append(Changeover("M1", 1, "KP1", "KP1", 5.0))
    assert "changeover" in {v.rule for v in verify_schedule(sched, [env], s, C)}


@settings(max_examples=200)
@given(st.integers(0, 10**6))
def test_daily_heuristic_conserves_and_respects_residuals(seed):
    scenario, env, prev, config, _orders, machines = micro_instance(seed)
    day = schedule_day(env, 1, prev, scenario, config)
    for (o, _d), want in env.q.items():
        got = math.fsum(v for (oo, _m, _dd), v in day.z.items() if oo == o)
        assert got + day.unassigned.get((o, 1), 0.0) == pytest.approx(want, abs=1e-9)
    cap = {m.id: m.capacity_hours for m in machines}
    hours = {m.id: m.unit_times for m in machines}
    used = {}
    for (o, m, _d), v in day.z.items():
        f = scenario.order(o).product
        assert v > 0
        used[m] = used.get(m, 0.0) + v * hours[m][f]
        made = math.fsum(w for (oo, mm, _dd), w in day.z.items()
                         if mm == m and scenario.order(oo).product == f)
        assert made <= env.y[(m, f, 1)] + 1e-9
    for m, h in used.items():
        assert h <= cap[m] + 1e-9


def test_greedy_schedule_is_plant_feasible():
    s = desk_scenario(5)
    sched = greedy_noplan(s)
    assert sched.scheme == "greedy"
    assert verify_schedule(sched, None, s, SchemeConfig(scheme=Scheme.GREEDY)) == []


def test_greedy_matches_planned_otd_without_coupling():
    # no accessories and plenty of room: planning adds nothing
    orders = [("O1", "P1", 400, 4, 8, 1.0, 0.1, 0.9), ("O2", "P2", 300, 5, 9, 1.0, 0.1, 0.9)]
    s = plant(orders, horizon=10, machines=("M1", "M2"), t=0.01, lead=3)
    cfg = SchemeConfig(scheme=Scheme.C, solver_limits=MilpLimits(gap_tol=1e-6))
    envs, _ = rolling_plan(s, cfg)
    planned = schedule_horizon(envs, s, cfg)
    assert on_time_delivery(greedy_noplan(s), s)[0] == on_time_delivery(planned, s)[0] == 1.0
