"""Sources of forced-decoding probabilities and translations.

Three interchangeable implementations sit behind `ProbabilityBackend`:
a deterministic lexical toy model (`toy`), a read-only store of
precomputed traces (`tracefile`), and an HTTP client for a remote
scoring service (`http`).
"""

from .base import ProbabilityBackend, ScoreRequest, TokenTrace, TraceKey
from .http import HttpBackend
from .toy import ToyBackend
from .tracefile import TraceFileBackend, TraceStoreBackend, load_traces, save_traces

__all__ = [
    "ProbabilityBackend",
    "ScoreRequest",
    "TokenTrace",
    "TraceKey",
    "ToyBackend",
    "TraceFileBackend",
    "TraceStoreBackend",
    "HttpBackend",
    "load_traces",
    "save_traces",
    "make_backend",
]


def make_backend(spec: str) -> ProbabilityBackend:
    """Build a backend from a CLI spec: 'toy', 'trace:<path>' or 'http:<url>'."""
    if spec == "toy":
        return ToyBackend()
    if spec.startswith("trace:"):
        return TraceFileBackend(spec[len("trace:"):])
    if spec.startswith("http:"):
        url = spec[len("http:"):]
        if not url.startswith(("http://", "https://")):
            url = "http://" + url.lstrip("/")
        return HttpBackend(url)
    raise ValueError(f"unknown backend spec {spec!r} (want toy | trace:<path> | http:<url>)")
