"""Exception types raised by the decomposition library.

Everything derives from ``SudakovError`` (a ``RuntimeError``) so scripts can
catch one type. ``InputError`` marks problems with user-supplied files, flags
or parameters; the CLI maps it to exit code 2.
"""

from __future__ import annotations


class SudakovError(RuntimeError):
    """Base class for library errors."""


class InputError(SudakovError):
    """Bad user input: files, flags or parameters."""

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None, column: int | None = None):
        self.path = path
        self.line = line
        self.column = column
        super().__init__(message)

    def __str__(self) -> str:
        message = super().__str__()
        where = []
        if self.path:
            where.append(str(self.path))
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.column is not None:
            where.append(f"column {self.column}")
        if where:
            return f"{', '.join(where)}: {message}"
        return message


class ParseError(InputError):
    """Malformed cost file, problem file or CSV."""


class MissingFileError(InputError):
    """A referenced input file does not exist."""


class ConfigError(InputError):
    """Malformed environment or CLI setting."""


class DimensionMismatchError(InputError):
    """Vectors or marginals disagree on the ambient dimension."""


class UnbalancedWeightsError(InputError):
    """Marginal weights are non-positive or do not balance."""


class MissingArtifactError(InputError):
    """A command needs an artifact that an earlier command writes."""


class UnsupportedDimensionError(InputError):
    """The requested output only exists for another dimension."""


class ParameterOrderError(InputError):
    """Numeric parameters violate their required ordering."""


class GridCoverageError(InputError):
    """A grid does not cover the nodes it must evaluate."""


class InfeasibleInstanceError(SudakovError):
    """No transport plan exists on the unmasked pairs."""


class PlanNotOptimalError(SudakovError):
    """A supplied plan admits no certifying dual potentials."""


class FaceViolationError(SudakovError):
    """A support displacement lies outside its class face."""


class DegenerateChartError(SudakovError):
    """A class span is too close to horizontal for a stable chart."""


class MarginalMismatchError(SudakovError):
    """Class marginals do not carry the same mass."""


class EmptyDecompositionError(SudakovError):
    """A report was requested for a decomposition without classes."""
