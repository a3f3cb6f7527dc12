"""Self-contained MILP engine: bounded revised simplex plus branch-and-bound."""

from .bnb import solve_lp, solve_milp
from .kernels import BACKEND
from .lpformat import write_lp
from .model import (Constraint, MilpLimits, MilpModel, MilpSolution, Sense, Status, Variable,
                    VarKind)

__all__ = [
    "BACKEND", "Constraint", "MilpLimits", "MilpModel", "MilpSolution", "Sense", "Status",
    "Variable", "VarKind", "solve_lp", "solve_milp", "write_lp",
]
