import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from support import plant
from mixplan.domain import CNC, G130, G150, SchemeConfig
from mixplan.errors import InfeasibleSpec, ParseError, ValidationError, VersionMismatch
from mixplan.fixtures import desk_scenario, desk_spec
from mixplan.metrics import evaluate
from mixplan.planner import PlanEnvelope, rolling_plan
from mixplan.scenario_io import (GeneratorSpec, dumps_envelopes, dumps_report, dumps_scenario,
                                 fleet_size, generate_case_scenario, load_envelopes, load_report,
                                 load_scenario, load_schedule, save_schedule, save_scenario)
from mixplan.scheduler import Changeover, Schedule, schedule_horizon


def minimal():
    return plant([("O1", "P1", 100, 1, 3, 1.0, 0.1, 0.5)], horizon=3)


def test_minimal_round_trip(tmp_path):
    path = tmp_path / "s.json"
    save_scenario(minimal(), path)
    back = load_scenario(path)
    assert back == minimal()
    assert back.horizon_days == 3
    assert load_scenario(path.read_bytes()) == back


@settings(max_examples=15)
@given(st.integers(0, 10_000))
def test_generated_scenarios_round_trip(seed):
    s = desk_scenario(seed)
    text = dumps_scenario(s)
    assert load_scenario(text.encode()) == s
    assert dumps_scenario(load_scenario(text.encode())) == text


def test_generator_is_deterministic():
    spec = GeneratorSpec(seed=7, scale=0.25, horizon_days=30, n_products=12, n_orders=30)
    assert dumps_scenario(generate_case_scenario(spec)) == dumps_scenario(generate_case_scenario(spec))


def test_generator_seeds_differ():
    assert dumps_scenario(desk_scenario(1)) != dumps_scenario(desk_scenario(2))


def test_full_scale_fleet():
    assert fleet_size(1.0) == {G150: 8, G130: 4, CNC: 2}
    s = generate_case_scenario(GeneratorSpec(seed=0, n_products=10, n_orders=20, horizon_days=40))
    groups = {g: len(ms) for g, ms in s.groups().items()}
    assert groups == {G150: 8, G130: 4, CNC: 2}


def test_desk_shape():
    s = desk_scenario(0)
    assert (s.horizon_days, len(s.products), len(s.orders)) == (30, 12, 30)
    assert desk_spec(0).scale == 0.25


@pytest.mark.parametrize("bad", [dict(scale=0), dict(scale=-1), dict(n_orders=0),
                                 dict(horizon_days=4), dict(due_clustering=2.0)])
def test_generator_rejects_bad_specs(bad):
    with pytest.raises(InfeasibleSpec):
        generate_case_scenario(GeneratorSpec(**{**dict(seed=0, scale=0.25, n_products=5,
                                                       n_orders=5, horizon_days=30), **bad}))


def edited(change):
    data = json.loads(dumps_scenario(minimal()))
    change(data)
    return json.dumps(data).encode()


def test_unknown_mold_names_the_product():
    def change(d):
        d["products"][0]["mold"] = "nope"
    with pytest.raises(ValidationError, match="product 'P1'.*mold"):
        load_scenario(edited(change))


def test_due_day_beyond_horizon():
    def change(d):
        d["orders"][0]["due_day"] = 9
    with pytest.raises(ValidationError, match="order 'O1'"):
        load_scenario(edited(change))


def test_wrong_type_reported():
    def change(d):
        d["orders"][0]["quantity"] = "many"
    with pytest.raises(ValidationError, match="quantity"):
        load_scenario(edited(change))


def test_version_mismatch():
    def change(d):
        d["format_version"] = 99
    with pytest.raises(VersionMismatch):
        load_scenario(edited(change))


def test_malformed_json_has_position():
    with pytest.raises(ParseError) as info:
        load_scenario(b'{"horizon_days": 3,\n  oops}')
    assert info.value.line == 2


# result artifacts

def sample_schedule():
    s = Schedule(scheme="B", initial_molds={"M1": None, "M2": "KP1"})
    s.z[("O1", "M1", 2)] = 12.5
    s.z[("O2", "M2", 3)] = 0.1
    s.mold_state[("M1", 2)] = ("KP1", "KP2")
    s.changeovers.append(Changeover("M1", 2, None, "KP1", 5.0))
    s.unassigned[("O1", 3)] = 2.25
    s.accessory[("P1", 1)] = 7.0
    s.outsourced["O2"] = 3.0
    return s


def test_schedule_round_trip(tmp_path):
    s = sample_schedule()
    save_schedule(s, tmp_path)
    assert load_schedule(tmp_path) == s
    assert load_schedule(tmp_path / "schedule.csv") == s


def test_empty_schedule_round_trip(tmp_path):
    save_schedule(Schedule(), tmp_path)
    assert load_schedule(tmp_path) == Schedule()


def test_schedule_csv_needs_header(tmp_path):
    (tmp_path / "schedule.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ParseError):
        load_schedule(tmp_path)


def test_schedule_bad_number_has_line(tmp_path):
    (tmp_path / "schedule.csv").write_text("order,machine,day,units\nO1,M1,2,1\nO1,M1,x,1\n")
    with pytest.raises(ParseError) as info:
        load_schedule(tmp_path)
    assert info.value.line == 3


def test_envelopes_round_trip_three_windows():
    envs = [PlanEnvelope((a, b), {("M1", "P1", a): 1.5}, {("O1", a): 1.5}, {("M1", a): ("K1",)},
                         {("P1", a): 0.5}, {("P1", a): 0.25}, {"O1": 0.0}, 3.5, {"O1": 0.0},
                         "feasible", 0.01)
            for a, b in ((1, 10), (11, 20), (21, 30))]
    back = load_envelopes(dumps_envelopes(envs).encode())
    assert back == envs
    assert [e.window for e in back] == [(1, 10), (11, 20), (21, 30)]


def test_envelope_kind_checked():
    with pytest.raises(ParseError, match="envelopes"):
        load_envelopes(dumps_report(_report()).encode())


def _report():
    s = desk_scenario(0)
    cfg = SchemeConfig(scheme="A")
    envs, _ = rolling_plan(s, cfg)
    return evaluate(schedule_horizon(envs, s, cfg), envs, s)


def test_report_round_trip():
    r = _report()
    text = dumps_report(r)
    back = load_report(text.encode())
    assert back == r
    assert dumps_report(back) == text
