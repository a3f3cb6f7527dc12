"""Model container for bounded-variable maximization MILPs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np
import scipy.sparse as sp


class VarKind(str, Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"
    INTEGER = "integer"


class Sense(str, Enum):
    LE = "<="
    GE = ">="
    EQ = "="


class Status(str, Enum):
    OPTIMAL = "optimal"
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class Variable:
    id: str
    lower: float = 0.0
    upper: float = math.inf
    kind: VarKind = VarKind.CONTINUOUS
    objective: float = 0.0

    @property
    def is_discrete(self) -> bool:
        return self.kind is not VarKind.CONTINUOUS


@dataclass(frozen=True)
class Constraint:
    coeffs: Mapping[str, float]
    sense: Sense
    rhs: float
    name: str = ""


@dataclass(frozen=True)
class MilpLimits:
    max_nodes: int = 100_000
    time_limit: float = 300.0
    feasibility_tol: float = 1e-6
    integrality_tol: float = 1e-6
    gap_tol: float = 1e-6
    max_moves: int = 200  # LP re-solves spent on neighborhood moves, when a neighbors hook is given

    def __post_init__(self):
        if self.max_moves < 0:
            raise ValueError("MilpLimits.max_moves must be >= 0")
        for name in ("max_nodes", "time_limit", "feasibility_tol", "integrality_tol", "gap_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"MilpLimits.{name} must be positive")


@dataclass
class MilpSolution:
    status: Status
    values: dict[str, float] = field(default_factory=dict)
    objective: float = math.nan
    gap: float = math.inf
    nodes_explored: int = 0
    iterations: int = 0

    @property
    def has_solution(self) -> bool:
        return self.status in (Status.OPTIMAL, Status.FEASIBLE)


class MilpModel:
    """Maximization model built incrementally.

    Variables keep insertion order; that order is the id ordering used for
    every deterministic tie-break in the solver.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self._index: dict[str, int] = {}

    def add_var(self, id: str, lower: float = 0.0, upper: float = math.inf,
                kind: VarKind = VarKind.CONTINUOUS, objective: float = 0.0) -> str:
        if id in self._index:
            raise ValueError(f"duplicate variable id {id!r}")
        kind = VarKind(kind)
        lower, upper = float(lower), float(upper)
        if math.isnan(lower) or math.isnan(upper) or lower > upper:
            raise ValueError(f"variable {id!r}: need lower <= upper, got [{lower}, {upper}]")
        if kind is VarKind.BINARY and (lower < 0 or upper > 1):
            raise ValueError(f"binary variable {id!r} must have bounds within [0, 1]")
        if not math.isfinite(objective):
            raise ValueError(f"variable {id!r}: objective coefficient must be finite")
        self._index[id] = len(self.variables)
        self.variables.append(Variable(id, lower, upper, kind, float(objective)))
        return id

    def add_constraint(self, coeffs: Mapping[str, float], sense: Sense | str, rhs: float,
                       name: str = "") -> Constraint:
        clean = {}
        for vid, a in coeffs.items():
            if vid not in self._index:
                raise KeyError(f"constraint {name!r} references unknown variable {vid!r}")
            a = float(a)
            if not math.isfinite(a):
                raise ValueError(f"constraint {name!r}: non-finite coefficient on {vid!r}")
            if a != 0.0:
                clean[vid] = clean.get(vid, 0.0) + a
        clean = {k: v for k, v in clean.items() if v != 0.0}
        if not math.isfinite(rhs):
            raise ValueError(f"constraint {name!r}: rhs must be finite")
        con = Constraint(clean, Sense(sense), float(rhs), name)
        self.constraints.append(con)
        return con

    def index(self, var_id: str) -> int:
        return self._index[var_id]

    def __contains__(self, var_id: str) -> bool:
        return var_id in self._index

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    @property
    def discrete_indices(self) -> list[int]:
        return [i for i, v in enumerate(self.variables) if v.is_discrete]

    def relaxed(self) -> "MilpModel":
        """Copy with every integrality requirement dropped."""
        out = MilpModel(self.name + "-lp")
        for v in self.variables:
            out.add_var(v.id, v.lower, v.upper, VarKind.CONTINUOUS, v.objective)
        out.constraints = list(self.constraints)
        return out

    def arrays(self):
        """(A as CSR, senses, rhs, lower, upper, objective, discrete mask)."""
        rows, cols, data = [], [], []
        for i, con in enumerate(self.constraints):
            for vid, a in con.coeffs.items():
                rows.append(i)
                cols.append(self._index[vid])
                data.append(a)
        A = sp.csr_matrix((data, (rows, cols)), shape=(self.n_constraints, self.n_vars), dtype=float)
        senses = [c.sense for c in self.constraints]
        rhs = np.array([c.rhs for c in self.constraints], dtype=float)
        lower = np.array([v.lower for v in self.variables], dtype=float)
        upper = np.array([v.upper for v in self.variables], dtype=float)
        obj = np.array([v.objective for v in self.variables], dtype=float)
        discrete = np.array([v.is_discrete for v in self.variables], dtype=bool)
        return A, senses, rhs, lower, upper, obj, discrete

    def objective_value(self, values: Mapping[str, float]) -> float:
        return math.fsum(v.objective * values.get(v.id, 0.0) for v in self.variables)

    def residuals(self, values: Mapping[str, float]) -> list[float]:
        """Per-constraint violation (0 when satisfied), recomputed from scratch."""
        out = []
        for con in self.constraints:
            lhs = math.fsum(a * values.get(vid, 0.0) for vid, a in con.coeffs.items())
            if con.sense is Sense.LE:
                out.append(max(0.0, lhs - con.rhs))
            elif con.sense is Sense.GE:
                out.append(max(0.0, con.rhs - lhs))
            else:
                out.append(abs(lhs - con.rhs))
        return out

    def bound_violations(self, values: Mapping[str, float]) -> list[float]:
        return [max(0.0, v.lower - values.get(v.id, 0.0), values.get(v.id, 0.0) - v.upper)
                for v in self.variables]
