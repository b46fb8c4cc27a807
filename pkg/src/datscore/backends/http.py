"""HTTP client backend for a remote scoring service.

Wire protocol (JSON over POST, UTF-8):

    /v1/score      {"input_text","input_lang","output_text","output_lang"}
                   -> {"tokens":[...],"logprobs":[...],"entropies":[...]}
    /v1/translate  {"text","src_lang","tgt_lang"} -> {"translation": str}

Both endpoints also accept a JSON array of request objects and return an
array of responses in order; this client always uses the array form.
Errors come back as 4xx/5xx with {"error": str}.

Concurrent calls from pipeline workers are coalesced by a dispatcher
thread into batches of up to `batch_size`. Transport failures and 5xx
responses are retried with exponential backoff (3 attempts starting at
250 ms) before surfacing BackendUnavailable.
"""

from __future__ import annotations

import queue
import threading
import time
from concurrent.futures import Future
from typing import Any

import httpx

from ..errors import BackendUnavailable, EmptyInput, TraceInvariantError, UnsupportedLanguage
from .base import ProbabilityBackend, ScoreRequest, TokenTrace

_SENTINEL = object()


def _map_client_error(status: int, message: str) -> Exception:
    lowered = message.lower()
    if "language" in lowered:
        return UnsupportedLanguage(message)
    if "empty" in lowered:
        return EmptyInput(message)
    return BackendUnavailable(f"request rejected ({status}): {message}")


def _trace_from_obj(obj: Any) -> TokenTrace:
    if not isinstance(obj, dict):
        raise TraceInvariantError(f"score response is not an object: {obj!r}")
    try:
        trace = TokenTrace(
            tuple(str(t) for t in obj["tokens"]),
            tuple(float(x) for x in obj["logprobs"]),
            tuple(float(x) for x in obj["entropies"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise TraceInvariantError(f"malformed score response: {exc}") from None
    return trace.validate()


class HttpBackend(ProbabilityBackend):
    """Batching, retrying client for the /v1/score + /v1/translate protocol."""

    name = "http"

    def __init__(
        self,
        base_url: str,
        batch_size: int = 16,
        timeout: float = 60.0,
        attempts: int = 3,
        backoff: float = 0.25,
        transport: httpx.BaseTransport | None = None,
    ):
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self._base_url = base_url.rstrip("/")
        self._batch_size = batch_size
        self._attempts = attempts
        self._backoff = backoff
        self._client = httpx.Client(base_url=self._base_url, timeout=timeout, transport=transport)
        self._queue: queue.SimpleQueue = queue.SimpleQueue()
        self._closed = False
        self._dispatcher = threading.Thread(
            target=self._dispatch_loop, name="http-backend-dispatch", daemon=True
        )
        self._dispatcher.start()

    # -- public API ---------------------------------------------------------

    def forced_score(self, req: ScoreRequest) -> TokenTrace:
        payload = {
            "input_text": req.input_text,
            "input_lang": req.input_lang,
            "output_text": req.output_text,
            "output_lang": req.output_lang,
        }
        obj = self._submit("/v1/score", payload).result()
        return _trace_from_obj(obj)

    def translate(self, text: str, src_lang: str, tgt_lang: str) -> str:
        if not text.strip():
            raise EmptyInput("text is empty")
        payload = {"text": text, "src_lang": src_lang, "tgt_lang": tgt_lang}
        obj = self._submit("/v1/translate", payload).result()
        if not isinstance(obj, dict) or not str(obj.get("translation", "")).strip():
            raise BackendUnavailable(f"malformed translate response: {obj!r}")
        return str(obj["translation"])

    @property
    def supports_translate(self) -> bool:
        return True

    def identity(self) -> dict:
        return {"kind": "http", "url": self._base_url}

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        self._queue.put(_SENTINEL)
        self._dispatcher.join()
        self._client.close()

    def __enter__(self) -> "HttpBackend":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()

    # -- dispatcher ---------------------------------------------------------

    def _submit(self, path: str, payload: dict) -> Future:
        if self._closed:
            raise BackendUnavailable("backend is closed")
        fut: Future = Future()
        self._queue.put((path, payload, fut))
        return fut

    def _dispatch_loop(self) -> None:
        while True:
            item = self._queue.get()
            if item is _SENTINEL:
                return
            batch = [item]
            while len(batch) < self._batch_size:
                try:
                    nxt = self._queue.get_nowait()
                except queue.Empty:
                    break
                if nxt is _SENTINEL:
                    self._queue.put(_SENTINEL)
                    break
                batch.append(nxt)
            by_path: dict[str, list[tuple[dict, Future]]] = {}
            for path, payload, fut in batch:
                by_path.setdefault(path, []).append((payload, fut))
            for path, group in by_path.items():
                self._send_group(path, group)

    def _send_group(self, path: str, group: list[tuple[dict, Future]]) -> None:
        futures = [fut for _, fut in group]
        try:
            results = self._post_with_retry(path, [payload for payload, _ in group])
            if not isinstance(results, list) or len(results) != len(group):
                raise BackendUnavailable(
                    f"batch response shape mismatch: sent {len(group)}, "
                    f"got {len(results) if isinstance(results, list) else type(results).__name__}"
                )
        except Exception as exc:
            for fut in futures:
                fut.set_exception(exc)
            return
        for fut, result in zip(futures, results):
            fut.set_result(result)

    def _post_with_retry(self, path: str, body: list) -> Any:
        last_error: Exception = BackendUnavailable("no attempts made")
        for attempt in range(self._attempts):
            try:
                resp = self._client.post(path, json=body)
            except httpx.TransportError as exc:
                last_error = BackendUnavailable(f"transport failure: {exc}")
            else:
                if resp.status_code == 200:
                    return resp.json()
                try:
                    message = str(resp.json().get("error", resp.text))
                except ValueError:
                    message = resp.text
                if 400 <= resp.status_code < 500:
                    # Definitive rejection; retrying cannot help.
                    raise _map_client_error(resp.status_code, message)
                last_error = BackendUnavailable(f"server error {resp.status_code}: {message}")
            if attempt + 1 < self._attempts:
                time.sleep(self._backoff * (2**attempt))
        raise last_error
