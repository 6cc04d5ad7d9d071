"""Exception types."""


class LVError(Exception):
    """Base class for all errors raised by this package."""


class DriftExceeded(LVError):
    """An operator produced a vector too far off the simplex to be float noise."""


class DimensionMismatch(LVError, ValueError):
    pass


class NotSkewSymmetric(LVError, ValueError):
    pass


class EntryOutOfRange(LVError, ValueError):
    pass


class LambdaOutOfRange(LVError, ValueError):
    pass


class ParameterOutOfRange(LVError, ValueError):
    pass


class UntrustedOperator(LVError):
    """A user-supplied generating map was used before passing validation."""


class ContinuationStalled(LVError):
    """Homotopy continuation could not advance the parameter any further."""
