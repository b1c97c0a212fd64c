"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class VoldiscError(Exception):
    """Base class for all library errors."""


class DomainError(VoldiscError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ShapeError(VoldiscError, ValueError):
    """Element shapes of two operands cannot be composed."""


class HorizonError(VoldiscError, ValueError):
    """A stored sequence is too short for the requested evaluation."""


class PreconditionError(VoldiscError, ValueError):
    """A documented precondition of an operation is violated."""


class CertificationError(VoldiscError):
    """No quantitative convergence or truncation certificate can be derived."""


class SummabilityRefusal(CertificationError):
    """A summability criterion cannot be evaluated or does not hold."""


class SingularityError(VoldiscError, ArithmeticError):
    """A matrix that must be inverted is numerically rank deficient.

    Parameters
    ----------
    message
        Human readable description.
    rank
        Numerical rank of the offending matrix.
    dim
        Its dimension.
    """

    def __init__(self, message: str, rank: int, dim: int) -> None:
        super().__init__(f"{message} (numerical rank {rank} of {dim})")
        self.rank = rank
        self.dim = dim


class SeedError(VoldiscError, ValueError):
    """Initial values of a shifted recursion violate the consistency equation."""

    def __init__(self, message: str, residual: float) -> None:
        super().__init__(f"{message} (consistency residual {residual:.3e})")
        self.residual = residual


class ConvergenceError(VoldiscError, ArithmeticError):
    """A quadrature or series failed to reach its target accuracy."""


class UnsupportedInstanceError(VoldiscError, ValueError):
    """The input is valid mathematically but outside what is implemented."""


class AccuracyWarning(UserWarning):
    """Evaluation outside the parameter box on which accuracy was validated."""


class ScenarioError(VoldiscError, ValueError):
    """A scenario file is malformed or inconsistent.

    Syntax errors carry the 1-based ``line`` and ``column`` of the offending
    text; semantic errors carry the dotted ``field`` path (for instance
    ``"term 2.A"``) and the line where that field was given, if any.
    """

    def __init__(self, message: str, line: int | None = None, column: int | None = None,
                 field: str | None = None, path: str | None = None) -> None:
        where = []
        if path:
            where.append(path)
        if line is not None:
            where.append(f"line {line}" + (f", column {column}" if column is not None else ""))
        if field:
            where.append(f"field {field!r}")
        prefix = ": ".join([", ".join(where)]) + ": " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.column = column
        self.field = field
        self.path = path
