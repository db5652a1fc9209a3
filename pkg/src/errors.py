"""Exception hierarchy for fgeom.

Input problems (bad model files, malformed expressions, violated
preconditions) derive from InputError and map to exit code 1 on the
command line. Numerical breakdowns derive from NumericalError and map
to exit code 2.
"""

from typing import Optional


class FgeomError(Exception):
    """Base class for every error raised by fgeom."""


class InputError(FgeomError, ValueError):
    """Invalid input or violated precondition."""


class NumericalError(FgeomError, ArithmeticError):
    """A computation could not produce a finite, well-conditioned result."""


# caputo_kernel

class InvalidOrder(InputError):
    pass


class NonPositiveAbscissa(InputError):
    pass


class DegenerateGrid(InputError):
    pass


class InvertedInterval(InputError):
    pass


class InsufficientResolutions(InputError):
    pass


# expr

class ExpressionSyntaxError(InputError):
    """Malformed expression text, with the 1-based line and column of the fault."""

    def __init__(self, message: str, line: int = 1, column: int = 1,
                 source: Optional[str] = None):
        self.line = line
        self.column = column
        self.source = source
        super().__init__(f"{message} (line {line}, column {column})")


class UnknownSymbol(InputError):
    pass


class IndexOutOfRange(InputError):
    pass


class EvaluationDomainError(NumericalError):
    pass


# lagrange / geometry / gravity

class DegenerateHessian(NumericalError):
    pass


class GridTooCoarse(InputError):
    pass


class SingularMetric(NumericalError):
    pass


class SingularTransform(NumericalError):
    pass


class NotNAdapted(InputError):
    pass


class EmptySample(InputError):
    pass


# dynamics

class BlowUp(NumericalError):
    pass


class StepCountTooSmall(InputError):
    pass


# cli

class ModelFileError(InputError):
    pass
