"""Exception hierarchy.

HTTP mapping (see service.py): RequestError -> 400, Overloaded -> 503,
anything else escaping the model -> 500. The 400 messages deliberately
name the offending condition ("language", "empty") because clients
dispatch on those words.
"""

from __future__ import annotations


class BridgeError(Exception):
    """Base class for all errors raised by this package."""


class RequestError(BridgeError):
    """Caller fault: unsupported language, empty text, malformed body."""


class Overloaded(BridgeError):
    """The request queue is full; retry later."""
