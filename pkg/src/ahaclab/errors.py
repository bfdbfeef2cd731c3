"""Exception types shared across the package."""


class AhacError(Exception):
    pass


class NumericalOverflow(AhacError, FloatingPointError):
    """A recorded computation produced a non-finite value.

    ``node`` is the tape index of the offending node (or ``None`` when the
    check happened outside a tape, e.g. in an optimizer step).
    """

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class ArityError(AhacError, ValueError):
    """Shape or length mismatch between an operation and its arguments."""


class ConfigError(AhacError, ValueError):
    pass
