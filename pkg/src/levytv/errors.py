"""Exception hierarchy shared by all levytv modules."""


class LevyTVError(Exception):
    """Base class for every error raised by levytv."""


class DomainError(LevyTVError, ValueError):
    """An argument lies outside the domain of the operation."""


class IntegrabilityError(LevyTVError, ValueError):
    """The measure does not satisfy the Levy integrability condition."""


class NumericError(LevyTVError, ArithmeticError):
    """A quadrature or solver did not reach the requested tolerance."""

    def __init__(self, message, achieved_tolerance=None):
        super().__init__(message)
        self.achieved_tolerance = achieved_tolerance


class InfeasibleError(LevyTVError):
    """A precondition of a threshold or bound does not hold."""

    def __init__(self, message, inequality=None):
        super().__init__(message)
        self.inequality = inequality


class CapabilityError(LevyTVError):
    """The requested computation is not supported for this measure."""


class ResolutionError(LevyTVError):
    """A spectral grid is too coarse or too narrow for the requested accuracy."""


class DegenerateError(LevyTVError, ZeroDivisionError):
    """A bound is undefined because a variance vanishes."""


class SizeError(LevyTVError, ValueError):
    """Too few observations for the statistic."""


class DataError(LevyTVError, ValueError):
    """Input data are malformed (e.g. contain non-finite values)."""


class CalibrationError(LevyTVError, ValueError):
    """Monte Carlo calibration was requested with too little precision."""
