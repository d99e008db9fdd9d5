"""Exception types shared across the package.

All inherit from :class:`MvstError` so callers can catch library failures
with one clause; most also subclass ``ValueError`` to behave conventionally
when used as a library.
"""


class MvstError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(MvstError, ValueError):
    """Mismatched series lengths, dimension counts, or shapes."""


class BoundsError(MvstError, IndexError):
    """A coordinate (dim, start, length, ...) is out of range."""


class StratificationError(MvstError, ValueError):
    """A resample cannot preserve the original class layout."""


class StatisticsError(MvstError, ValueError):
    """A statistical operation received degenerate input."""


class ConfigError(MvstError, ValueError):
    """An invalid or inconsistent configuration."""


class ContractError(MvstError, RuntimeError):
    """A time/candidate contract produced no usable result."""


class DatasetParseError(MvstError, ValueError):
    """A dataset file violates the text format.

    Carries the path and 1-based line number of the offending line.
    """

    def __init__(self, message: str, path: str = "<unknown>", line: int = 0):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line
