"""Exception types raised across the package."""


class StreamF2Error(Exception):
    """Base class for all package errors."""


class InvalidParam(StreamF2Error, ValueError):
    pass


class NoPrimeInRange(StreamF2Error, ValueError):
    def __init__(self, lo, hi):
        super().__init__(f"no prime in [{lo}, {hi}]")
        self.lo = lo
        self.hi = hi


class OutOfUniverse(StreamF2Error, ValueError):
    pass


class OutOfRange(StreamF2Error, ValueError):
    pass


class DegenerateM(StreamF2Error, ValueError):
    pass


class UnknownFingerprint(StreamF2Error, KeyError):
    pass


class Aborted(StreamF2Error):
    """A streaming run hit its abort condition. This is an outcome, not a bug."""

    def __init__(self, failed_count, threshold=None):
        msg = f"aborted with {failed_count} failed buckets"
        if threshold is not None:
            msg += f" (threshold {threshold})"
        super().__init__(msg)
        self.failed_count = failed_count
        self.threshold = threshold


class NoCandidateMatched(StreamF2Error):
    pass


class EnumerationCapExceeded(StreamF2Error):
    def __init__(self, count, cap):
        super().__init__(f"candidate family has {count} members, cap is {cap}")
        self.count = count
        self.cap = cap


class DepthTooLarge(StreamF2Error, ValueError):
    pass


class CapExceeded(StreamF2Error, ValueError):
    pass


class NotDivisible(StreamF2Error, ValueError):
    pass


class BudgetExhausted(StreamF2Error):
    def __init__(self, kept):
        super().__init__(f"attempt budget exhausted with {len(kept)} sets kept")
        self.kept = kept


class EmptyInput(StreamF2Error, ValueError):
    pass


class InsufficientSpan(StreamF2Error, ValueError):
    pass


class StreamFormatError(StreamF2Error, ValueError):
    pass


class AggregateMismatch(StreamF2Error, ValueError):
    """Stored aggregates disagree with those recomputed from the rows."""
