"""Exception hierarchy shared across the package.

CLI exit-code mapping (see cli.py): dataset/input problems -> 2,
backend problems -> 3, statistical preconditions -> 4.
"""

from __future__ import annotations


class DatscoreError(Exception):
    """Base class for all errors raised by this package."""


class DatasetError(DatscoreError):
    """Dataset file cannot be parsed or violates schema invariants."""


class DatasetParseError(DatasetError):
    """Malformed record; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class EmptyInput(DatscoreError):
    """A scored text is empty after whitespace trimming."""


class UnsupportedLanguage(DatscoreError):
    """The backend does not support the requested language (pair)."""


class TranslateUnsupported(DatscoreError):
    """The backend can score but cannot translate."""


class BackendUnavailable(DatscoreError):
    """Transport or protocol failure talking to a remote backend; retryable."""


class TraceInvariantError(DatscoreError):
    """A token trace violates its invariants (lengths, sign, range)."""


class TraceFormatError(DatasetError):
    """Malformed trace file record; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class TraceMissing(DatscoreError):
    """No stored trace for the requested (example, direction) key."""


class PipelineAborted(DatscoreError):
    """Too many examples failed backend scoring to trust the run."""


class InsufficientData(DatscoreError):
    """Not enough usable observations for the requested statistic."""


class ZeroVariance(DatscoreError):
    """A correlation input is constant where variation is required."""
