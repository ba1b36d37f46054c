"""Exception hierarchy shared by all fuzcal modules."""


class FuzcalError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(FuzcalError, ValueError):
    pass


class DomainError(FuzcalError, ValueError):
    pass


class PreconditionError(FuzcalError, ValueError):
    pass


class ConfigurationError(FuzcalError, ValueError):
    pass


class UnsupportedRepresentationError(FuzcalError, TypeError):
    pass


class UnsupportedObservableError(FuzcalError, TypeError):
    pass


class InvariantViolation(FuzcalError, ValueError):
    pass


class SingularConfigurationError(FuzcalError, ValueError):
    """Two particle positions coincide (or nearly so).

    The offending 0-based index pair is stored on ``pair``.
    """

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class ResourceLimitError(FuzcalError, MemoryError):
    pass


class NumericalError(FuzcalError, ArithmeticError):
    pass


class NearCollisionError(NumericalError):
    """Integration stopped because two particles came closer than the gap guard.

    ``last_state`` holds the last accepted phase point and ``time`` its time.
    """

    def __init__(self, message, last_state=None, time=None):
        super().__init__(message)
        self.last_state = last_state
        self.time = time


class StiffnessError(NumericalError):
    pass


class ParseError(FuzcalError, ValueError):
    """Raised by the function-string parser; ``position`` is a 0-based column."""

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position
