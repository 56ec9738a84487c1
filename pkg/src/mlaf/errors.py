"""Exception hierarchy shared by every module of the package."""


class MlafError(Exception):
    """Base class for all errors raised by mlaf."""


class DimensionError(MlafError, ValueError):
    """Array shapes are inconsistent with the filter length or memory order."""


class ParameterError(MlafError, ValueError):
    """A scalar parameter is outside its valid range."""


class UndefinedMetricError(MlafError, ValueError):
    """A metric cannot be evaluated (e.g. normalizing by a zero-norm channel)."""


class DomainError(MlafError, ValueError):
    """Hypotheses of an analytical result are violated."""


class ConfigurationError(MlafError, ValueError):
    """A run or estimator configuration is inconsistent."""


class NumericalBreakdownError(MlafError, ArithmeticError):
    """A recursion lost positive definiteness or produced non-finite values."""


class WavFormatError(MlafError, ValueError):
    """A WAV file is malformed or uses an unsupported encoding.

    Parameters
    ----------
    message : str
        Human readable description.
    offset : int
        Byte offset in the file at which the problem was detected.
    """

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset
