"""HTTP client backend over a mock transport: batching, retries, errors."""

from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor

import httpx
import pytest

from datscore.backends import HttpBackend
from datscore.backends.base import ScoreRequest
from datscore.errors import BackendUnavailable, EmptyInput, TraceInvariantError, UnsupportedLanguage


def score_response(item):
    # one-token trace whose logprob encodes the input text length
    return {"tokens": [item["output_text"]], "logprobs": [-float(len(item["input_text"]))], "entropies": [1.0]}


def make_backend(handler, **kw):
    kw.setdefault("backoff", 0.001)
    return HttpBackend("http://svc", transport=httpx.MockTransport(handler), **kw)


def _req(i=1):
    return ScoreRequest("x" * i, "fr", "out", "en")


def test_single_score_and_translate():
    def handler(request):
        body = json.loads(request.content)
        assert isinstance(body, list)  # client always uses the array form
        if request.url.path == "/v1/score":
            return httpx.Response(200, json=[score_response(item) for item in body])
        assert request.url.path == "/v1/translate"
        return httpx.Response(200, json=[{"translation": f"t:{item['text']}"} for item in body])

    with make_backend(handler) as backend:
        trace = backend.forced_score(_req(3))
        assert trace.logprobs == (-3.0,)
        assert trace.tokens == ("out",)
        assert backend.translate("bonjour", "fr", "en") == "t:bonjour"
        assert backend.supports_translate


def test_concurrent_calls_are_batched():
    sizes = []
    release = threading.Event()
    first = threading.Event()

    def handler(request):
        body = json.loads(request.content)
        sizes.append(len(body))
        if len(sizes) == 1:
            first.set()
            release.wait(timeout=5)
        return httpx.Response(200, json=[score_response(item) for item in body])

    backend = make_backend(handler, batch_size=16)
    try:
        with ThreadPoolExecutor(max_workers=21) as pool:
            futures = [pool.submit(backend.forced_score, _req(i + 1)) for i in range(21)]
            assert first.wait(timeout=5)
            # let the remaining submissions pile up behind the blocked request
            deadline = threading.Event()
            for _ in range(200):
                if backend._queue.qsize() >= 20:
                    break
                deadline.wait(0.01)
            release.set()
            results = [f.result(timeout=10) for f in futures]
        assert sorted(t.logprobs[0] for t in results) == [-float(i + 1) for i in range(21)][::-1]
        assert max(sizes) <= 16
        assert any(s > 1 for s in sizes)  # coalescing actually happened
    finally:
        backend.close()


def test_retries_then_succeeds():
    calls = []

    def handler(request):
        calls.append(1)
        if len(calls) < 3:
            return httpx.Response(503, json={"error": "warming up"})
        return httpx.Response(200, json=[score_response(i) for i in json.loads(request.content)])

    with make_backend(handler) as backend:
        assert backend.forced_score(_req()).logprobs == (-1.0,)
    assert len(calls) == 3


def test_retries_exhaust_to_backend_unavailable():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(500, json={"error": "boom"})

    with make_backend(handler) as backend:
        with pytest.raises(BackendUnavailable, match="boom"):
            backend.forced_score(_req())
    assert len(calls) == 3


def test_transport_errors_retry():
    calls = []

    def handler(request):
        calls.append(1)
        raise httpx.ConnectError("refused")

    with make_backend(handler) as backend:
        with pytest.raises(BackendUnavailable, match="transport"):
            backend.forced_score(_req())
    assert len(calls) == 3


def test_client_errors_do_not_retry():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(400, json={"error": "unsupported language pair fr-xx"})

    with make_backend(handler) as backend:
        with pytest.raises(UnsupportedLanguage):
            backend.forced_score(_req())
    assert len(calls) == 1


def test_client_error_mapping():
    def handler_empty(request):
        return httpx.Response(422, json={"error": "input_text is empty"})

    with make_backend(handler_empty) as backend:
        with pytest.raises(EmptyInput):
            backend.forced_score(_req())

    def handler_other(request):
        return httpx.Response(404, json={"error": "no such model"})

    with make_backend(handler_other) as backend:
        with pytest.raises(BackendUnavailable, match="404"):
            backend.forced_score(_req())


def test_invalid_trace_in_response_is_rejected():
    def handler(request):
        return httpx.Response(200, json=[{"tokens": ["a"], "logprobs": [0.5], "entropies": [0.0]}])

    with make_backend(handler) as backend:
        with pytest.raises(TraceInvariantError):
            backend.forced_score(_req())


def test_batch_shape_mismatch_is_an_error():
    def handler(request):
        return httpx.Response(200, json=[])

    with make_backend(handler) as backend:
        with pytest.raises(BackendUnavailable, match="shape"):
            backend.forced_score(_req())


def test_malformed_translate_response():
    def handler(request):
        return httpx.Response(200, json=[{"translation": "  "}])

    with make_backend(handler) as backend:
        with pytest.raises(BackendUnavailable, match="translate"):
            backend.translate("hi", "en", "fr")


def test_closed_backend_rejects_new_work():
    def handler(request):
        return httpx.Response(200, json=[])

    backend = make_backend(handler)
    backend.close()
    backend.close()  # idempotent
    with pytest.raises(BackendUnavailable, match="closed"):
        backend.forced_score(_req())


def test_identity_records_url():
    def handler(request):
        return httpx.Response(200, json=[])

    with make_backend(handler) as backend:
        assert backend.identity() == {"kind": "http", "url": "http://svc"}
