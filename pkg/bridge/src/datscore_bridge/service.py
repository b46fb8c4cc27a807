"""HTTP face of the bridge.

Endpoints (JSON over POST, UTF-8):

    /v1/score      {"input_text","input_lang","output_text","output_lang"}
                   -> {"tokens":[...],"logprobs":[...],"entropies":[...]}
    /v1/translate  {"text","src_lang","tgt_lang"} -> {"translation": str}

Both endpoints also accept an array of request objects and answer with
an array in the same order; a single-object body gets a single-object
response. Errors are 4xx/5xx with {"error": str}: 400 for caller
faults (unsupported language, empty text, malformed body), 503 when
the queue is full, 500 when the model fails.

All model work funnels through one bounded queue drained by a single
worker coroutine. The worker pulls whatever is queued (up to max_batch
items) into one forward pass, so concurrent requests share batches.
Items from one request are validated all-or-nothing before anything is
queued, and a request that cannot fit in the queue is rejected whole.
"""

from __future__ import annotations

import asyncio
from contextlib import asynccontextmanager
from dataclasses import dataclass
from typing import Any

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .config import BridgeConfig
from .errors import Overloaded, RequestError
from .model import BridgeModel, ScoreItem

_SCORE_FIELDS = ("input_text", "input_lang", "output_text", "output_lang")
_TRANSLATE_FIELDS = ("text", "src_lang", "tgt_lang")


@dataclass(slots=True)
class _Job:
    kind: str  # "score" | "translate"
    item: Any
    future: asyncio.Future


class WorkQueue:
    """Bounded queue + single draining worker shared by all requests."""

    def __init__(self, model: BridgeModel, max_batch: int, queue_size: int, max_new_tokens: int):
        self._model = model
        self._max_batch = max_batch
        self._max_new_tokens = max_new_tokens
        self._queue: asyncio.Queue[_Job] = asyncio.Queue(maxsize=queue_size)
        self._worker: asyncio.Task | None = None
        self.max_batch_seen = 0

    async def submit(self, kind: str, items: list) -> list:
        """Queue every item or none; results come back in item order."""
        if self._worker is None or self._worker.done():
            self._worker = asyncio.get_running_loop().create_task(self._drain_forever())
        if self._queue.qsize() + len(items) > self._queue.maxsize:
            raise Overloaded(
                f"queue is full ({self._queue.qsize()}/{self._queue.maxsize} items queued, "
                f"{len(items)} requested)"
            )
        loop = asyncio.get_running_loop()
        futures = [loop.create_future() for _ in items]
        for item, future in zip(items, futures):
            self._queue.put_nowait(_Job(kind, item, future))
        results = await asyncio.gather(*futures, return_exceptions=True)
        for res in results:
            if isinstance(res, BaseException):
                raise res
        return list(results)

    async def aclose(self) -> None:
        if self._worker is not None:
            self._worker.cancel()
            try:
                await self._worker
            except asyncio.CancelledError:
                pass
            self._worker = None

    async def _drain_forever(self) -> None:
        while True:
            jobs = [await self._queue.get()]
            while len(jobs) < self._max_batch:
                try:
                    jobs.append(self._queue.get_nowait())
                except asyncio.QueueEmpty:
                    break
            self.max_batch_seen = max(self.max_batch_seen, len(jobs))
            await self._run_jobs(jobs)

    async def _run_jobs(self, jobs: list[_Job]) -> None:
        scores = [j for j in jobs if j.kind == "score"]
        if scores:
            try:
                traces = await asyncio.to_thread(self._model.score_batch, [j.item for j in scores])
            except Exception:
                # A drained batch can mix items from several requests; rescore
                # one by one so a fault is charged to its own item only.
                for job in scores:
                    try:
                        trace = (await asyncio.to_thread(self._model.score_batch, [job.item]))[0]
                    except Exception as exc:
                        job.future.set_exception(exc)
                    else:
                        job.future.set_result(trace)
            else:
                for job, trace in zip(scores, traces):
                    job.future.set_result(trace)
        for job in (j for j in jobs if j.kind == "translate"):
            try:
                text, src_lang, tgt_lang = job.item
                translation = await asyncio.to_thread(
                    self._model.translate, text, src_lang, tgt_lang, self._max_new_tokens
                )
            except Exception as exc:
                job.future.set_exception(exc)
            else:
                job.future.set_result(translation)


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def _listify(body: Any) -> tuple[list, bool]:
    """Normalize a single-object or array body to a list; remember which."""
    if isinstance(body, list):
        return body, False
    return [body], True


def _parse_item(obj: Any, fields: tuple[str, ...]) -> tuple[str, ...]:
    if not isinstance(obj, dict):
        raise RequestError(f"request item is not an object: {obj!r}")
    values = []
    for name in fields:
        if name not in obj:
            raise RequestError(f"missing field {name!r}")
        value = obj[name]
        if not isinstance(value, str):
            raise RequestError(f"field {name!r} must be a string")
        values.append(value)
    return tuple(values)


def create_app(config: BridgeConfig, model: BridgeModel | None = None) -> FastAPI:
    """Build the ASGI app; the model loads eagerly unless one is injected."""
    bridge_model = model if model is not None else BridgeModel(config.model, config.device)
    work = WorkQueue(bridge_model, config.max_batch, config.queue_size, config.max_new_tokens)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        await work.aclose()

    app = FastAPI(title="datscore-bridge", lifespan=lifespan)
    app.state.model = bridge_model
    app.state.work = work

    async def handle(request: Request, kind: str, fields: tuple[str, ...]) -> JSONResponse:
        try:
            body = await request.json()
        except Exception:
            return _error(400, "request body is not valid JSON")
        raw_items, single = _listify(body)
        try:
            if kind == "score":
                items: list = [ScoreItem(*_parse_item(obj, fields)) for obj in raw_items]
                for item in items:
                    bridge_model.validate_score_item(item)
            else:
                items = [_parse_item(obj, fields) for obj in raw_items]
                for text, src_lang, tgt_lang in items:
                    bridge_model.require_lang(src_lang, "src_lang")
                    bridge_model.require_lang(tgt_lang, "tgt_lang")
                    if not text.strip():
                        raise RequestError("text is empty")
        except RequestError as exc:
            return _error(400, str(exc))
        try:
            results = await work.submit(kind, items)
        except RequestError as exc:
            return _error(400, str(exc))
        except Overloaded as exc:
            return _error(503, f"overloaded: {exc}")
        except Exception as exc:
            return _error(500, f"model failure: {exc}")
        if kind == "score":
            payloads = [trace.payload() for trace in results]
        else:
            payloads = [{"translation": text} for text in results]
        return JSONResponse(payloads[0] if single and payloads else payloads)

    @app.post("/v1/score")
    async def score(request: Request) -> JSONResponse:
        return await handle(request, "score", _SCORE_FIELDS)

    @app.post("/v1/translate")
    async def translate(request: Request) -> JSONResponse:
        return await handle(request, "translate", _TRANSLATE_FIELDS)

    return app
