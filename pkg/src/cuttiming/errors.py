"""Exception hierarchy shared by all pipeline stages."""


class CutTimingError(Exception):
    """Base class for every error raised by this package."""


class SchemaError(CutTimingError):
    """Tracking data violates the CSV schema or a table invariant."""

    def __init__(self, message, frame=None):
        super().__init__(message if frame is None else f"frame {frame}: {message}")
        self.frame = frame


class MissingColumn(SchemaError):
    pass


class BadObjectCount(SchemaError):
    pass


class OutOfBounds(SchemaError):
    pass


class DuplicateHolder(SchemaError):
    pass


class InvalidPairing(SchemaError):
    pass


class NoHolderAnchor(CutTimingError):
    pass


class TooShort(CutTimingError):
    pass


class ShiftBeforePossession(CutTimingError):
    pass


class SpanTooShort(CutTimingError):
    pass


class EmptySample(CutTimingError):
    pass


class TooFewPlayers(CutTimingError):
    pass


class InfeasibleScript(CutTimingError):
    pass


class UnknownLayer(CutTimingError):
    pass
