"""Exception types shared across the package."""


class DomainError(ValueError):
    """A parameter or state value lies outside the model's domain."""


class ValidationError(ValueError):
    """Input data (datasets, specs, plans) failed validation."""


class IntegrationError(RuntimeError):
    """Numerical integration produced a non-finite or badly negative state.

    Attributes
    ----------
    time : float
        Model time at which the failure was detected.
    """

    def __init__(self, message, time=float("nan")):
        super().__init__(message)
        self.time = time


class InsufficientDataError(ValueError):
    """Too few usable samples to compute a statistic."""


class OutOfRangeError(DomainError):
    """A requested time lies outside a trajectory's time span."""


class CoarseStepWarning(RuntimeWarning):
    """An integration clamped enough mass to break conservation; use a smaller step."""
