"""Exception hierarchy shared by the solvers and the CLI."""


class GivensError(Exception):
    """Base class for all errors raised by this package."""


class InvalidCoordinateError(GivensError, ValueError):
    pass


class InvalidDimensionError(GivensError, ValueError):
    pass


class ShapeError(GivensError, ValueError):
    pass


class ConfigurationError(GivensError, ValueError):
    pass


class OrthogonalityError(GivensError, ValueError):
    pass


class SymmetryError(GivensError, ValueError):
    pass


class DegeneratePenaltyError(GivensError, ValueError):
    pass


class InsufficientDataError(GivensError, ValueError):
    pass


class NumericError(GivensError, ArithmeticError):
    """A numerical routine produced or received a non-finite value."""

    def __init__(self, message, theta=None):
        super().__init__(message)
        self.theta = theta


class RankDeficiencyError(NumericError):
    pass


class RecoveryError(NumericError):
    pass


class FormatError(GivensError, ValueError):
    """Malformed input file; the message carries the path and line number."""
