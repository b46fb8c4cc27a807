"""Model-backed scoring service and offline trace exporter.

The bridge loads one multilingual seq2seq checkpoint and exposes it two
ways: an HTTP service speaking the /v1/score + /v1/translate protocol,
and a batch command that writes forced-decoding traces for a whole
dataset to a JSON Lines file.
"""

__version__ = "0.1.0"

from .config import BridgeConfig
from .errors import BridgeError, Overloaded, RequestError
from .model import BridgeModel, ScoreItem, Trace

__all__ = [
    "BridgeConfig",
    "BridgeError",
    "BridgeModel",
    "Overloaded",
    "RequestError",
    "ScoreItem",
    "Trace",
    "__version__",
]
