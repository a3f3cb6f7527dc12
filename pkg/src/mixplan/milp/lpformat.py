"""Debug dump of a model in the common LP text format.

Layout: ``Maximize`` objective, ``Subject To`` rows, ``Bounds``, then
``Generals`` and ``Binaries`` sections, closed by ``End``. Variable ids are
written as given, so they must already be LP-safe names when the file is
meant for an external solver. The output is for cross-checking only and is
not byte-stable across versions.
"""

from __future__ import annotations

import math
from typing import TextIO

from .model import MilpModel, Sense, VarKind


def _terms(coeffs) -> str:
    parts = []
    for vid, a in coeffs:
        sign = "-" if a < 0 else "+"
        parts.append(f"{sign} {abs(a):.17g} {vid}")
    text = " ".join(parts) if parts else "0"
    return text[2:] if text.startswith("+ ") else text


def write_lp(model: MilpModel, out: TextIO) -> None:
    out.write(f"\\ {model.name}\nMaximize\n obj: ")
    out.write(_terms((v.id, v.objective) for v in model.variables if v.objective != 0.0))
    out.write("\nSubject To\n")
    op = {Sense.LE: "<=", Sense.GE: ">=", Sense.EQ: "="}
    for i, con in enumerate(model.constraints):
        name = con.name or f"c{i}"
        out.write(f" {name}: {_terms(con.coeffs.items())} {op[con.sense]} {con.rhs:.17g}\n")
    out.write("Bounds\n")
    for v in model.variables:
        lo = "-inf" if math.isinf(v.lower) else f"{v.lower:.17g}"
        hi = "+inf" if math.isinf(v.upper) else f"{v.upper:.17g}"
        out.write(f" {lo} <= {v.id} <= {hi}\n")
    generals = [v.id for v in model.variables if v.kind is VarKind.INTEGER]
    binaries = [v.id for v in model.variables if v.kind is VarKind.BINARY]
    if generals:
        out.write("Generals\n " + " ".join(generals) + "\n")
    if binaries:
        out.write("Binaries\n " + " ".join(binaries) + "\n")
    out.write("End\n")
