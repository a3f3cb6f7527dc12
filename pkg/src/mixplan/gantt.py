"""Machine-group Gantt charts as standalone SVG.

Each machine is a row and each day a fixed-width column spanning the
machine's day hours. Within a day, hours lost to mold changes come first
(hatched), then one block per product with width proportional to its busy
hours. Product colors come from a stable hash of the product id, so the same
product is drawn the same way in every chart.
"""

from __future__ import annotations

import zlib
from xml.sax.saxutils import escape, quoteattr

from .domain import Scenario, Scheme, unit_time
from .planner import planning_scenario
from .scheduler import Schedule

PALETTE = (
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac", "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
)
DAY_WIDTH = 40.0
ROW_HEIGHT = 22.0
ROW_GAP = 6.0
LEFT = 90.0
TOP = 30.0
AXIS = 26.0
LEGEND_ROW = 16.0


def product_color(product_id: str) -> str:
    return PALETTE[zlib.crc32(product_id.encode("utf-8")) % len(PALETTE)]


def _fmt(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".")


def render_gantt(schedule: Schedule, scenario: Scenario, group: str | None = None) -> str:
    """SVG text for ``schedule``; ``group`` keeps only that machine group's rows."""
    scheme = Scheme.parse(schedule.scheme) if schedule.scheme != Scheme.GREEDY.value else Scheme.C
    plan = planning_scenario(scenario, scheme)
    machines = [m for m in plan.molding_machines if group is None or m.group == group]
    H = scenario.horizon_days
    width = LEFT + H * DAY_WIDTH + 20.0

    busy: dict[tuple[str, int], dict[str, float]] = {}
    for (o, m, d), v in schedule.z.items():
        if v <= 0:
            continue
        f = plan.order(o).product
        t = unit_time(plan.machine(m), plan.product(f))
        cell = busy.setdefault((m, d), {})
        cell[f] = cell.get(f, 0.0) + v * t
    lost: dict[tuple[str, int], float] = {}
    for c in schedule.changeovers:
        lost[(c.machine, c.day)] = lost.get((c.machine, c.day), 0.0) + c.hours

    shown = sorted({f for (m, _d), cell in busy.items() if any(mm.id == m for mm in machines)
                    for f in cell})
    legend_rows = (len(shown) + 5) // 6
    height = TOP + len(machines) * (ROW_HEIGHT + ROW_GAP) + AXIS + legend_rows * LEGEND_ROW + 20.0

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" height="{_fmt(height)}" '
           f'viewBox="0 0 {_fmt(width)} {_fmt(height)}" font-family="sans-serif" font-size="10">',
           '<defs><pattern id="hatch" width="4" height="4" patternUnits="userSpaceOnUse" '
           'patternTransform="rotate(45)"><rect width="4" height="4" fill="#ffffff"/>'
           '<line x1="0" y1="0" x2="0" y2="4" stroke="#444444" stroke-width="1.5"/></pattern></defs>',
           f'<text x="{_fmt(LEFT)}" y="16" font-size="12">'
           f'{escape(schedule.scheme)} schedule{escape(f" - {group}" if group else "")}</text>']

    for row, m in enumerate(machines):
        y = TOP + row * (ROW_HEIGHT + ROW_GAP)
        out.append(f'<text class="machine" x="4" y="{_fmt(y + ROW_HEIGHT * 0.7)}">{escape(m.id)}</text>')
        out.append(f'<rect class="lane" x="{_fmt(LEFT)}" y="{_fmt(y)}" width="{_fmt(H * DAY_WIDTH)}" '
                   f'height="{_fmt(ROW_HEIGHT)}" fill="#f4f4f4" stroke="#cccccc"/>')
        scale = DAY_WIDTH / m.day_hours
        for d in scenario.days:
            x = LEFT + (d - 1) * DAY_WIDTH
            hours = lost.get((m.id, d), 0.0)
            if hours > 0:
                w = hours * scale
                out.append(f'<rect class="changeover" data-machine={quoteattr(m.id)} data-day="{d}" '
                           f'data-hours="{_fmt(hours)}" x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" '
                           f'height="{_fmt(ROW_HEIGHT)}" fill="url(#hatch)" stroke="#444444" '
                           f'stroke-width="0.5"/>')
                x += w
            cell = busy.get((m.id, d), {})
            order = _block_order(schedule, plan, m.id, d, cell)
            for f in order:
                w = cell[f] * scale
                out.append(f'<rect class="block" data-machine={quoteattr(m.id)} data-day="{d}" '
                           f'data-product={quoteattr(f)} data-hours="{_fmt(cell[f])}" x="{_fmt(x)}" '
                           f'y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(ROW_HEIGHT)}" '
                           f'fill="{product_color(f)}"><title>{escape(f)} day {d}: '
                           f'{_fmt(cell[f])} h</title></rect>')
                x += w

    axis_y = TOP + len(machines) * (ROW_HEIGHT + ROW_GAP)
    out.append(f'<line class="axis" x1="{_fmt(LEFT)}" y1="{_fmt(axis_y)}" '
               f'x2="{_fmt(LEFT + H * DAY_WIDTH)}" y2="{_fmt(axis_y)}" stroke="#000000"/>')
    for d in scenario.days:
        x = LEFT + (d - 1) * DAY_WIDTH
        out.append(f'<line x1="{_fmt(x)}" y1="{_fmt(axis_y)}" x2="{_fmt(x)}" y2="{_fmt(axis_y + 4)}" '
                   f'stroke="#000000"/>')
        out.append(f'<text class="tick" x="{_fmt(x + DAY_WIDTH / 2)}" y="{_fmt(axis_y + 14)}" '
                   f'text-anchor="middle">{d}</text>')
    out.append(f'<text x="{_fmt(LEFT + H * DAY_WIDTH / 2)}" y="{_fmt(axis_y + AXIS)}" '
               f'text-anchor="middle">day</text>')

    ly = axis_y + AXIS + 12.0
    for i, f in enumerate(shown):
        x = LEFT + (i % 6) * 90.0
        y = ly + (i // 6) * LEGEND_ROW
        out.append(f'<g class="legend" data-product={quoteattr(f)}><rect x="{_fmt(x)}" y="{_fmt(y - 9)}" '
                   f'width="10" height="10" fill="{product_color(f)}"/>'
                   f'<text x="{_fmt(x + 14)}" y="{_fmt(y)}">{escape(f)}</text></g>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _block_order(schedule: Schedule, plan: Scenario, machine: str, day: int, cell) -> list[str]:
    """Products in the order their molds ran that day, then by id."""
    molds = schedule.mold_state.get((machine, day), ())
    rank = {k: i for i, k in enumerate(molds)}
    return sorted(cell, key=lambda f: (rank.get(plan.product(f).mold, len(rank)), f))
