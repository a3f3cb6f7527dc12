import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from support import random_milp
from mixplan.errors import NoIncumbentAtLimit
from mixplan.milp import MilpLimits, MilpModel, Sense, Status, VarKind, solve_lp, solve_milp, write_lp
from mixplan.milp import kernels
from mixplan.milp import _kernels_py
from mixplan.oracle import dense_simplex, enumerate_milp

INF = math.inf


def knapsack():
    m = MilpModel("knap")
    for i, (w, v) in enumerate([(5, 10), (4, 40), (6, 30), (3, 50)]):
        m.add_var(f"b{i}", 0, 1, VarKind.BINARY, v)
    m.add_constraint({f"b{i}": w for i, w in enumerate([5, 4, 6, 3])}, "<=", 10)
    return m


def random_lp(seed: int) -> MilpModel:
    """LP with some free or half-bounded columns, to exercise the primal path."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    model = MilpModel(f"lp{seed}")
    for j in range(n):
        kind = rng.integers(0, 4)
        lo, hi = {0: (0.0, float(rng.integers(1, 6))), 1: (-INF, INF),
                  2: (float(rng.integers(-3, 1)), INF), 3: (-INF, float(rng.integers(0, 4)))}[int(kind)]
        model.add_var(f"v{j}", lo, hi, objective=float(rng.integers(-4, 6)))
    for _ in range(int(rng.integers(1, 7))):
        coeffs = {f"v{j}": float(rng.integers(-5, 6)) for j in range(n) if rng.random() < 0.7}
        sense = ["<=", ">=", "="][int(rng.choice(3, p=[0.6, 0.3, 0.1]))]
        model.add_constraint(coeffs, sense, float(rng.integers(-5, 12)))
    return model


def dense_reference(model: MilpModel):
    A, senses, rhs, lo, hi, c, _ = model.arrays()
    return dense_simplex(c, A.toarray(), [s.value for s in senses], rhs, lo, hi)


# model construction

def test_duplicate_variable_rejected():
    m = MilpModel()
    m.add_var("x")
    with pytest.raises(ValueError, match="duplicate"):
        m.add_var("x")


@pytest.mark.parametrize("lo, hi", [(2.0, 1.0), (math.nan, 1.0)])
def test_bad_bounds_rejected(lo, hi):
    with pytest.raises(ValueError):
        MilpModel().add_var("x", lo, hi)


def test_binary_bounds_checked():
    with pytest.raises(ValueError, match="binary"):
        MilpModel().add_var("b", 0, 2, VarKind.BINARY)


def test_constraint_on_unknown_variable():
    m = MilpModel()
    m.add_var("x")
    with pytest.raises(KeyError):
        m.add_constraint({"y": 1.0}, "<=", 1)


def test_nonfinite_coefficients_rejected():
    m = MilpModel()
    m.add_var("x")
    with pytest.raises(ValueError):
        m.add_constraint({"x": math.inf}, "<=", 1)
    with pytest.raises(ValueError):
        m.add_constraint({"x": 1.0}, "<=", math.nan)


def test_zero_and_repeated_coefficients_merge():
    m = MilpModel()
    m.add_var("x")
    m.add_var("y")
    con = m.add_constraint({"x": 0.0, "y": 2.0}, Sense.LE, 4)
    assert dict(con.coeffs) == {"y": 2.0}


@pytest.mark.parametrize("field", ["max_nodes", "time_limit", "gap_tol"])
def test_limits_validate(field):
    with pytest.raises(ValueError):
        MilpLimits(**{field: 0})
    with pytest.raises(ValueError):
        MilpLimits(max_moves=-1)


def test_relaxed_drops_integrality():
    r = knapsack().relaxed()
    assert not r.discrete_indices
    assert r.n_constraints == 1


# LP

def test_lp_textbook():
    m = MilpModel()
    m.add_var("x", objective=3)
    m.add_var("y", objective=5)
    m.add_constraint({"x": 1}, "<=", 4)
    m.add_constraint({"y": 2}, "<=", 12)
    m.add_constraint({"x": 3, "y": 2}, "<=", 18)
    sol = solve_lp(m)
    assert sol.status is Status.OPTIMAL
    assert sol.objective == pytest.approx(36)
    assert sol.values == pytest.approx({"x": 2, "y": 6})


def test_lp_infeasible():
    m = MilpModel()
    m.add_var("x", 0, 1)
    m.add_constraint({"x": 1}, ">=", 2)
    assert solve_lp(m).status is Status.INFEASIBLE


def test_lp_unbounded_free_variable():
    m = MilpModel()
    m.add_var("x", -INF, INF, objective=1)
    m.add_var("y", 0, 1)
    m.add_constraint({"x": 1, "y": -1}, ">=", -3)
    assert solve_lp(m).status is Status.UNBOUNDED


def test_lp_free_variables_at_optimum():
    m = MilpModel()
    m.add_var("x", -INF, INF, objective=1)
    m.add_var("y", -INF, INF, objective=1)
    m.add_constraint({"x": 1, "y": 1}, "<=", 3)
    m.add_constraint({"x": 1, "y": -1}, "=", -5)
    sol = solve_lp(m)
    assert sol.status is Status.OPTIMAL
    assert sol.objective == pytest.approx(3)
    assert max(m.residuals(sol.values)) <= 1e-9


def test_lp_without_rows():
    m = MilpModel()
    m.add_var("x", -2, 5, objective=-1)
    sol = solve_lp(m)
    assert sol.values["x"] == pytest.approx(-2)


@settings(max_examples=150)
@given(st.integers(0, 10**6))
def test_lp_matches_dense_tableau(seed):
    model = random_lp(seed)
    sol = solve_lp(model)
    status, _x, obj = dense_reference(model)
    assert sol.status.value == status
    if status == "optimal":
        assert sol.objective == pytest.approx(obj, abs=1e-6, rel=1e-9)
        assert max(model.residuals(sol.values), default=0.0) <= 1e-6
        assert max(model.bound_violations(sol.values)) <= 1e-9


# MILP

def test_knapsack():
    sol = solve_milp(knapsack())
    assert sol.status is Status.OPTIMAL
    assert sol.objective == pytest.approx(90)
    assert sol.gap <= 1e-6


def test_integer_bounds_empty_after_rounding():
    m = MilpModel()
    m.add_var("k", 0.2, 0.8, VarKind.INTEGER, 1)
    assert solve_milp(m).status is Status.INFEASIBLE


def test_pure_lp_goes_through_lp_path():
    m = MilpModel()
    m.add_var("x", 0, 2.5, objective=1)
    assert solve_milp(m).objective == pytest.approx(2.5)


def test_infeasible_incumbent_ignored():
    sol = solve_milp(knapsack(), incumbent={"b0": 1, "b1": 1, "b2": 1, "b3": 1})
    assert sol.objective == pytest.approx(90)


def wide_knapsack():
    rng = np.random.default_rng(3)
    m = MilpModel()
    w = rng.integers(10, 60, size=30)
    for i in range(30):
        m.add_var(f"b{i}", 0, 1, VarKind.BINARY, float(w[i] + rng.integers(0, 9)))
    m.add_constraint({f"b{i}": float(w[i]) for i in range(30)}, "<=", float(w.sum() // 2) + 0.5)
    return m


def test_node_limit_reports_feasible_with_gap():
    m = wide_knapsack()
    full = solve_milp(m)
    cut = solve_milp(m, MilpLimits(max_nodes=1), incumbent={f"b{i}": 0.0 for i in range(30)})
    assert cut.status in (Status.FEASIBLE, Status.OPTIMAL)
    assert cut.objective <= full.objective + 1e-9
    if cut.status is Status.FEASIBLE:
        assert cut.gap > 0


def test_node_limit_without_incumbent_raises():
    with pytest.raises(NoIncumbentAtLimit):
        solve_milp(wide_knapsack(), MilpLimits(max_nodes=1))


@settings(max_examples=120)
@given(st.integers(1000, 10**6))
def test_milp_matches_enumeration(seed):
    model = random_milp(seed)
    sol = solve_milp(model, MilpLimits(gap_tol=1e-9))
    ref = enumerate_milp(model)
    assert sol.status.value == ref.status
    if ref.status == "optimal":
        assert sol.objective == pytest.approx(ref.objective, abs=1e-6)
        assert max(model.residuals(sol.values), default=0.0) <= 1e-6
        for i in model.discrete_indices:
            v = sol.values[model.variables[i].id]
            assert v == round(v)


def test_dive_and_neighbors_do_not_change_optimum():
    model = knapsack()
    calls = []

    def dive(values):
        calls.append("dive")
        frac = [k for k, v in values.items() if 1e-6 < v < 1 - 1e-6]
        return {frac[0]: 1.0} if frac else {}

    def neighbors(values):
        for k in sorted(values):
            yield {k: 1.0 - round(values[k])}

    sol = solve_milp(model, dive=dive, neighbors=neighbors, starts=[{"b0": 1.0}])
    assert sol.objective == pytest.approx(90)
    assert calls


# kernel backends

def test_backend_names():
    assert kernels.BACKEND in ("compiled", "python")
    assert kernels.load(pure=True) is _kernels_py


needs_compiled = pytest.mark.skipif(kernels.load(pure=False) is _kernels_py,
                                    reason="compiled kernels not built")


@needs_compiled
@settings(max_examples=60)
@given(st.integers(0, 10**6))
def test_compiled_and_pure_kernels_agree(seed):
    model = random_milp(seed)
    fast = solve_milp(model, MilpLimits(gap_tol=1e-9), kernels=kernels.load(pure=False))
    slow = solve_milp(model, MilpLimits(gap_tol=1e-9), kernels=kernels.load(pure=True))
    assert fast.status == slow.status
    if fast.has_solution:
        assert fast.objective == pytest.approx(slow.objective, abs=1e-6)


@needs_compiled
def test_kernel_functions_agree_elementwise():
    fast, slow = kernels.load(pure=False), kernels.load(pure=True)
    rng = np.random.default_rng(0)
    d = rng.normal(size=40)
    status = rng.integers(0, 5, size=40).astype(np.int8)
    for bland in (False, True):
        assert fast.price(d, status, 1e-9, bland) == slow.price(d, status, 1e-9, bland)


# LP text dump

def test_write_lp_sections():
    buf = io.StringIO()
    m = knapsack()
    m.add_var("g", -INF, 4, VarKind.INTEGER, 0.0)
    write_lp(m, buf)
    text = buf.getvalue()
    for part in ("Maximize", "Subject To", "Bounds", "Generals", "Binaries", "End"):
        assert part in text
    assert "-inf <= g <= 4" in text
