"""Compare the compiled simplex kernels with the numpy fallback.

Three workloads, each timed with both backends on identical inputs:
the pricing kernel alone on long reduced-cost vectors, branch and bound on
seeded random knapsack-style MILPs, and the LP relaxation of a planning
window from a desk-scale scenario.

    python benchmarks/bench_kernels.py [--repeat 3] [--milps 40]
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from mixplan.domain import SchemeConfig
from mixplan.fixtures import desk_scenario
from mixplan.milp import MilpModel, VarKind, solve_lp, solve_milp
from mixplan.milp import _kernels_py, kernels
from mixplan.planner import build_planning_model


def random_milp(seed: int, n: int = 14, m: int = 6) -> MilpModel:
    rng = np.random.default_rng(seed)
    model = MilpModel(f"bench{seed}")
    for j in range(n):
        kind = VarKind.BINARY if j % 2 == 0 else VarKind.CONTINUOUS
        model.add_var(f"v{j}", 0.0, 1.0 if kind is VarKind.BINARY else 4.0, kind,
                      float(rng.integers(1, 20)))
    for i in range(m):
        coeffs = {f"v{j}": float(rng.integers(1, 9)) for j in range(n) if rng.random() < 0.6}
        model.add_constraint(coeffs, "<=", float(rng.integers(10, 30)))
    return model


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def workloads(n_milps: int):
    rng = np.random.default_rng(0)
    d = rng.normal(size=5000)
    status = rng.integers(0, 5, size=5000).astype(np.int8)
    milps = [random_milp(s) for s in range(n_milps)]
    window = build_planning_model(desk_scenario(0), (1, 10), None, SchemeConfig(scheme="C")).model

    def pricing(k):
        for _ in range(2000):
            k.price(d, status, 1e-9, False)

    def bnb(k):
        for m in milps:
            solve_milp(m, kernels=k)

    def planning_lp(k):
        solve_lp(window, kernels=k)

    return [("price x2000 (n=5000)", pricing), (f"B&B on {n_milps} random MILPs", bnb),
            (f"LP relaxation, 10-day window ({window.n_vars} cols)", planning_lp)]


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--milps", type=int, default=40)
    args = p.parse_args(argv)

    compiled = kernels.load(pure=False)
    if compiled is _kernels_py:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")
        return 1
    print(f"{'workload':<48} {'compiled':>10} {'numpy':>10} {'speedup':>8}")
    ratios = []
    for name, fn in workloads(args.milps):
        fast = best_of(lambda: fn(compiled), args.repeat)
        slow = best_of(lambda: fn(_kernels_py), args.repeat)
        ratios.append(slow / fast)
        print(f"{name:<48} {fast:>9.3f}s {slow:>9.3f}s {slow / fast:>7.2f}x")
    print(f"geometric mean speedup {statistics.geometric_mean(ratios):.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
