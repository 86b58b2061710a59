"""Exception hierarchy shared by every module."""


class TwoTimeError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(TwoTimeError, ValueError):
    pass


class DuplicateSlot(TwoTimeError, ValueError):
    pass


class MissingSlots(TwoTimeError, ValueError):
    pass


class OutcomeIndexError(TwoTimeError, IndexError):
    pass


class NotCPTP(TwoTimeError, ValueError):
    pass


class EmptySubset(TwoTimeError, ValueError):
    pass


class NonNormalized(TwoTimeError, ValueError):
    pass


class InvalidProcessMatrix(TwoTimeError, ValueError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ForbiddenPostselection(TwoTimeError, ValueError):
    """The post-selection is incompatible with every outcome (zero denominator)."""


class SamplerExhausted(TwoTimeError, RuntimeError):
    pass


class EpsilonNotFound(TwoTimeError, RuntimeError):
    pass


class ParseError(TwoTimeError, ValueError):
    def __init__(self, message, field=None, offset=None):
        parts = [message]
        if field is not None:
            parts.append(f"field={field}")
        if offset is not None:
            parts.append(f"offset={offset}")
        super().__init__("; ".join(parts))
        self.field = field
        self.offset = offset
