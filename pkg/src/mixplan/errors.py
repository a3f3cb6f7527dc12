"""Exception hierarchy shared by every mixplan module."""

from __future__ import annotations


class MixplanError(Exception):
    """Base class for all library errors."""


class UnknownId(MixplanError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class IncompatiblePair(MixplanError):
    """A product's mold cannot be mounted on the requested machine."""


class ValidationError(MixplanError):
    """Raised with every field-level problem found, not just the first."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ParseError(MixplanError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)


class VersionMismatch(MixplanError):
    pass


class InfeasibleSpec(MixplanError):
    """Generator parameters that cannot yield a usable scenario."""


class NumericalFailure(MixplanError):
    """Simplex pivoting stalled past its iteration cap."""


class NoIncumbentAtLimit(MixplanError):
    """Search limits were exhausted before any integer-feasible point was found."""


class SolverFailure(MixplanError):
    pass


class EmptyWindow(MixplanError):
    pass


class InconsistentState(MixplanError):
    pass


class EnvelopeDayMissing(MixplanError):
    pass


class TooLarge(MixplanError):
    """Input exceeds the size caps of an exhaustive oracle."""
