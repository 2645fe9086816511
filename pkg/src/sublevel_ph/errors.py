"""Exception types raised by the library."""


class SublevelPHError(Exception):
    """Base class for all library errors."""


class EmptySeriesError(SublevelPHError):
    """The input series has length zero."""


class ConsecutiveTieError(SublevelPHError):
    """Two consecutive values are equal under the strict tie policy."""


class NonFiniteInputError(SublevelPHError):
    """The input contains NaN or infinite values."""


class InvalidRectangleError(SublevelPHError):
    """Rectangle coordinates violate -inf <= s1 <= s2 <= t1 <= t2 <= +inf."""


class InvalidThresholdsError(SublevelPHError):
    """Threshold pair violates s <= t."""


class IndexOutOfRangeError(SublevelPHError):
    """Run index outside the valid positions of the series."""


class DomainError(SublevelPHError):
    """Scalar argument outside the documented domain."""


class NoFinitePointsError(SublevelPHError):
    """The diagram carries no finite point with positive lifetime."""


class EmptyDiagramError(SublevelPHError):
    """The diagram has no points at all."""


class InfiniteLifetimeError(SublevelPHError):
    """Unrestricted evaluation of a functional unbounded at infinite lifetime."""


class OutsideDomainError(SublevelPHError):
    """Point lies outside the open half-plane x < y."""


class NegativeLifetimeError(SublevelPHError):
    """Lifetime threshold must be nonnegative."""


class QuantileUnavailableError(SublevelPHError):
    """The marginal model has no usable quantile function."""


class UnknownKernelStationaryLawError(SublevelPHError):
    """Markov kernel whose stationary law is not known in closed form."""


class CornerConditionError(SublevelPHError):
    """A step-function rectangle corner violates F(s) > 0 or F(t) < 1."""


class ConfigError(SublevelPHError):
    """Experiment or CLI configuration is invalid."""
