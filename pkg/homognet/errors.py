class HomogNetError(Exception):
    pass


class ArgumentError(HomogNetError, ValueError):
    """Invalid argument to an operation"""


class ConfigError(HomogNetError):
    """Run configuration could not be read or validated"""


class DimensionError(HomogNetError):
    """Array shape does not match the declared family dimensions"""


class NumericError(HomogNetError):
    """Non-finite value produced during evaluation"""

    def __init__(self, message: str, sample_index: int | None = None):
        super().__init__(message)
        self.sample_index = sample_index


class InfeasibleRegularizerError(HomogNetError):
    """Regularizer is infinite at the given parameters"""


class StalledDescentError(HomogNetError):
    """Line search could not find a decrease"""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace


class ConstraintError(HomogNetError):
    """A precondition inequality between constants is violated"""


class OutOfRegimeError(HomogNetError):
    """Closed form evaluated outside the range where it holds"""
