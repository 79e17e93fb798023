"""Exception hierarchy shared by all modules."""


class RSGBMError(Exception):
    """Base class for every error raised by the package."""


class ModelError(RSGBMError, ValueError):
    """Invalid model parameters (bad generator rows, nonpositive volatility, ...)."""


class IrreducibilityError(ModelError):
    """The generator's support graph is not strongly connected."""


class SolvabilityError(RSGBMError, ValueError):
    """Qu = v has no solution because v does not have zero stationary mean."""


class DomainError(RSGBMError, ValueError):
    """Argument outside the domain where an operation is defined."""


class NumericalError(RSGBMError, ArithmeticError):
    """Eigensolve, quadrature or consistency check failed numerically."""


class TruncationError(NumericalError):
    """A series did not reach its tolerance within the allowed number of terms."""

    def __init__(self, message, tail_bound=float("nan"), terms=0):
        super().__init__(message)
        self.tail_bound = tail_bound
        self.terms = terms


class ParseError(RSGBMError, ValueError):
    """Run configuration is not well-formed JSON."""

    def __init__(self, message, line=None, column=None):
        loc = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + loc)
        self.line = line
        self.column = column


class ValidationError(RSGBMError, ValueError):
    """Run configuration is well-formed but semantically invalid.

    ``errors`` holds every problem found, each as ``(field, message)``.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{f}: {m}" for f, m in self.errors))
