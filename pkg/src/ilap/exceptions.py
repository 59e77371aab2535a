"""Exception hierarchy for the ilap package."""


class ILAPError(ValueError):
    """Base class for all errors raised by ilap."""


class DimensionError(ILAPError):
    """Array shapes do not agree with the market size."""


class NonFiniteError(ILAPError):
    """An input array contains NaN or infinite entries."""


class FeedbackMismatchError(ILAPError):
    """Feedback keys differ from the allocated pairs."""


class RaggedRunsError(ILAPError):
    """Runs passed to an aggregation have different horizons."""


class ConfigError(ILAPError):
    """An experiment configuration is invalid."""


class RatingsFormatError(ILAPError):
    """A ratings file could not be parsed."""
