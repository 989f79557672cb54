"""Exception hierarchy shared by the library and the CLI.

Every error carries the process exit code the CLI returns for it:
2 for invalid input or configuration, 3 for numeric failures.
"""

from typing import Optional


class LsfBoundError(Exception):
    """Base class for all lsfbound errors."""

    exit_code = 2


class DomainError(LsfBoundError, ValueError):
    """An argument is outside the domain of the operation."""


class OrderError(DomainError):
    """Model order incompatible with the data (e.g. K >= frame length, odd K)."""


class InsufficientRateError(DomainError):
    """Rate does not exceed log2(I), so nothing is left for quantization."""


class ModelInvariantError(DomainError):
    """A mixture model violates its construction-time invariants."""


class MonotonicityError(DomainError):
    """A map that must be strictly increasing is not."""


class BracketingError(DomainError):
    """The LSD target is not bracketed by the rate grid."""

    def __init__(self, message: str, lsd_at_min: float, lsd_at_max: float):
        super().__init__(message)
        self.lsd_at_min = lsd_at_min
        self.lsd_at_max = lsd_at_max


class EmptyOutputError(LsfBoundError):
    """An operation produced nothing to work with."""


class InputError(LsfBoundError):
    """An input path cannot be read."""

    def __init__(self, path, reason: str):
        super().__init__(f"cannot read {path}: {reason}")
        self.path = path


class FormatError(LsfBoundError):
    """Unsupported or malformed file content."""


class ChannelError(FormatError):
    """Multichannel audio without an explicit downmix."""


class ParseError(FormatError):
    """Malformed text row; `line` is 1-based."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class NumericError(LsfBoundError, ArithmeticError):
    """Non-finite or otherwise failed computation."""

    exit_code = 3

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


class DegenerateFrameError(NumericError):
    """Zero-energy frame (r_0 <= 0)."""


class InstabilityError(NumericError):
    """Filter is not minimum-phase or its LSFs do not interleave."""
