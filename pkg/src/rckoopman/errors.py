"""Exception hierarchy shared by every stage of the pipeline."""


class RCKoopmanError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(RCKoopmanError, ValueError):
    """Array dimensions are inconsistent or too short for the operation."""


class DomainError(RCKoopmanError, ValueError):
    """A scalar argument lies outside the admissible range."""


class InputDataError(RCKoopmanError, ValueError):
    """Data contains NaN/inf or is otherwise unusable."""


class NumericError(RCKoopmanError, ArithmeticError):
    """A computation produced non-finite values.

    ``step`` carries the time index at which it happened, when known.
    """

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class DivergenceError(NumericError):
    """A simulated trajectory left the configured bounding box."""


class ConstructionError(RCKoopmanError):
    """A random reservoir could not be scaled to the requested spectral radius."""


class SelectionError(RCKoopmanError):
    """Spectral-radius selection found no lag below the correlation threshold."""
