"""Exception types raised across the package."""


class DivgaugeError(Exception):
    """Base class for all package errors."""


class DomainError(DivgaugeError, ValueError):
    """An input lies outside the domain where an operation is defined."""


class ConvergenceError(DivgaugeError, RuntimeError):
    """A numerical procedure did not reach its requested tolerance."""


class DivergedError(DivgaugeError, RuntimeError):
    """Training produced NaN evaluation objectives."""


class DegenerateError(DivgaugeError, ValueError):
    """A ratio was requested with a denominator too close to zero."""


class FactorizationError(DivgaugeError, ValueError):
    """A covariance matrix is not symmetric positive definite."""


class FormatError(DivgaugeError, ValueError):
    """A binary file does not follow the expected layout."""


class ParseError(DivgaugeError, ValueError):
    """A configuration file could not be parsed."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + where)
