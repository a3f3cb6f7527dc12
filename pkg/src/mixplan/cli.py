"""Command-line entry point: ``mixplan gen|run|gantt|verify|report``.

Exit codes: 0 success, 2 input error, 3 verification failure, 4 solver
failure. ``run`` builds every output in memory first and only then writes
the files, each through a temporary name, so a failed run leaves the
output directory as it was.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .domain import Scheme, SchemeConfig
from .errors import (InconsistentState, InfeasibleSpec, MixplanError, NoIncumbentAtLimit,
                     NumericalFailure, SolverFailure)
from .scenario_io import (GeneratorSpec, dumps_envelopes, dumps_report, dumps_schedule,
                          dumps_scenario, generate_case_scenario, load_envelopes, load_report,
                          load_scenario, load_schedule, schedule_files)

log = logging.getLogger("mixplan")

EXIT_OK, EXIT_INPUT, EXIT_VERIFY, EXIT_SOLVER = 0, 2, 3, 4
SOLVER_ERRORS = (SolverFailure, NumericalFailure, NoIncumbentAtLimit)


def _setup_logging() -> None:
    level = os.environ.get("MIXPLAN_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _fail(code: int, message: str) -> int:
    print(f"mixplan: {message}", file=sys.stderr)
    return code


def _write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


# commands

def cmd_gen(args) -> int:
    spec = GeneratorSpec(seed=args.seed, scale=args.scale, n_products=args.products,
                         n_orders=args.orders, horizon_days=args.horizon)
    try:
        text = dumps_scenario(generate_case_scenario(spec))
    except InfeasibleSpec as exc:
        return _fail(EXIT_INPUT, f"infeasible generator spec: {exc}")
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        _write(Path(args.out), text)
    return EXIT_OK


def _config(args) -> SchemeConfig:
    scheme = Scheme.parse(args.scheme)
    base = SchemeConfig(scheme=scheme, max_molds_per_day=args.max_molds)
    limits = base.solver_limits
    if args.time_limit is not None:
        limits = replace(limits, time_limit=args.time_limit)
    return SchemeConfig(scheme=scheme, max_molds_per_day=args.max_molds,
                        window_days=args.window, step_days=args.step, solver_limits=limits)


def cmd_run(args) -> int:
    from .metrics import evaluate
    from .planner import rolling_plan
    from .scheduler import greedy_noplan, schedule_horizon, verify_schedule

    try:
        scenario = load_scenario(args.scenario)
        config = _config(args)
    except (MixplanError, OSError, ValueError) as exc:
        return _fail(EXIT_INPUT, str(exc))
    if args.jobs is not None and args.jobs < 1:
        return _fail(EXIT_INPUT, "--jobs must be >= 1")
    out_dir = Path(args.out_dir)

    try:
        if config.scheme is Scheme.GREEDY:
            envelopes = None
            schedule = greedy_noplan(scenario, config)
        else:
            envelopes, _state = rolling_plan(scenario, config)
            schedule = schedule_horizon(envelopes, scenario, config)
    except SOLVER_ERRORS as exc:
        return _fail(EXIT_SOLVER, f"solver failure: {exc}")
    except (InconsistentState, ValueError) as exc:
        return _fail(EXIT_INPUT, str(exc))
    violations = verify_schedule(schedule, envelopes, scenario, config)
    report = evaluate(schedule, envelopes, scenario)

    alloc, changes, meta = dumps_schedule(schedule)
    texts = {"envelope.json": dumps_envelopes(envelopes or []),
             "schedule.csv": alloc, "changeovers.csv": changes, "schedule.json": meta,
             "report.json": dumps_report(report), "report.txt": report.to_text()}
    if violations:
        texts["violations.txt"] = "".join(f"{v}\n" for v in violations)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, text in texts.items():
            _write(out_dir / name, text)
        stale = out_dir / "violations.txt"
        if not violations and stale.exists():
            stale.unlink()
    except OSError as exc:
        return _fail(EXIT_INPUT, f"cannot write outputs: {exc}")

    print(report.summary_line())
    if violations:
        for v in violations[:20]:
            print(v, file=sys.stderr)
        return _fail(EXIT_VERIFY, f"{len(violations)} violations, see {out_dir / 'violations.txt'}")
    return EXIT_OK


def cmd_gantt(args) -> int:
    from .gantt import render_gantt

    try:
        if not schedule_files(args.schedule)[0].exists():
            raise FileNotFoundError(f"no schedule at {args.schedule}")
        schedule = load_schedule(args.schedule)
        scenario = load_scenario(args.scenario)
        svg = render_gantt(schedule, scenario, args.group)
    except (MixplanError, OSError, KeyError, ValueError) as exc:
        return _fail(EXIT_INPUT, str(exc))
    if args.out in (None, "-"):
        sys.stdout.write(svg)
    else:
        _write(Path(args.out), svg)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .scheduler import verify_schedule

    try:
        if not schedule_files(args.schedule)[0].exists():
            raise FileNotFoundError(f"no schedule at {args.schedule}")
        schedule = load_schedule(args.schedule)
        scenario = load_scenario(args.scenario)
        envelopes = load_envelopes(args.envelope) if args.envelope else None
        scheme = Scheme.parse(schedule.scheme)
        config = SchemeConfig(scheme=scheme, max_molds_per_day=args.max_molds)
        if envelopes is not None and not envelopes and scheme is Scheme.GREEDY:
            envelopes = None
        violations = verify_schedule(schedule, envelopes, scenario, config)
    except (MixplanError, OSError, KeyError, ValueError) as exc:
        return _fail(EXIT_INPUT, str(exc))
    for v in violations:
        print(v)
    if violations:
        return _fail(EXIT_VERIFY, f"{len(violations)} violations")
    print("ok: no violations")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        report = load_report(args.report)
    except (MixplanError, OSError) as exc:
        return _fail(EXIT_INPUT, str(exc))
    sys.stdout.write(report.to_text())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mixplan", description="Integrated planning and scheduling "
                                "for high-mix parallel-machine plants.")
    p.add_argument("--version", action="version", version=f"mixplan {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a seeded scenario")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--scale", type=float, default=1.0)
    g.add_argument("--products", type=int, default=37)
    g.add_argument("--orders", type=int, default=150)
    g.add_argument("--horizon", type=int, default=240)
    g.add_argument("--out", help="scenario file to write (default: standard output)")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="plan, schedule, verify and evaluate a scenario")
    r.add_argument("--scenario", required=True)
    r.add_argument("--scheme", default="C", help="A, B, C or greedy")
    r.add_argument("--window", type=int, default=30, help="planning window in days")
    r.add_argument("--step", type=int, default=None, help="days frozen per window (default: window)")
    r.add_argument("--out-dir", default="out")
    r.add_argument("--time-limit", type=float, default=None, help="seconds per planning window")
    r.add_argument("--max-molds", type=int, default=3, help="scheme B molds per machine-day")
    r.add_argument("--jobs", type=int, default=None, help="solver workers (the solver is serial)")
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("gantt", help="render a schedule as SVG")
    t.add_argument("--schedule", required=True, help="schedule directory or schedule.csv")
    t.add_argument("--scenario", required=True)
    t.add_argument("--group", default=None)
    t.add_argument("--out", help="SVG file to write (default: standard output)")
    t.set_defaults(func=cmd_gantt)

    v = sub.add_parser("verify", help="check a schedule against its plan and the plant")
    v.add_argument("--schedule", required=True, help="schedule directory or schedule.csv")
    v.add_argument("--envelope", default=None)
    v.add_argument("--scenario", required=True)
    v.add_argument("--max-molds", type=int, default=3)
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("report", help="print a saved evaluation report")
    e.add_argument("--report", required=True)
    e.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors already
        return int(exc.code or 0)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
