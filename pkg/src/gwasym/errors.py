class GwasymError(Exception):
    """Base class for errors raised by this package."""


class AccuracyError(GwasymError):
    """A requested accuracy cannot be reached with the available data or precision."""


class EventNotReached(GwasymError):
    """The flow did not hit 2y - 3w = 27 before the time horizon."""


class InvariantViolation(GwasymError):
    """A mathematically forced property failed numerically (sign, bracket, identity)."""


class CacheCorrupt(GwasymError):
    """A table cache file failed its checksum or could not be parsed."""
