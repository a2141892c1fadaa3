"""Exception hierarchy shared by all simulator modules."""


class SimError(Exception):
    """Base class for simulator errors."""


class InvalidParameterError(SimError, ValueError):
    """A parameter is outside its documented domain."""


class DegenerateSplitError(InvalidParameterError):
    """Pilot power of zero makes the estimation error unbounded."""


class DegenerateChannelError(InvalidParameterError):
    """An all-zero channel has no direction to quantize."""


class SingularSetError(SimError, ValueError):
    """The stacked channel rows of a served set are rank deficient."""


class UndefinedFairnessError(InvalidParameterError):
    """Jain's index is undefined for an all-zero throughput vector."""


class OutOfRangeError(InvalidParameterError):
    """A normalized frequency offset of one subcarrier or more."""


class ConfigError(SimError):
    """Invalid or unknown configuration entry."""
