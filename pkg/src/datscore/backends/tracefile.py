"""Read-only store of precomputed forced-decoding traces.

Trace file format: UTF-8 JSON Lines, one record per (scoring row,
direction):

    {"example_id": str, "from": str, "to": str,
     "tokens": [str], "logprobs": [num], "entropies": [num]}

with "from"/"to" in {"src","ref","hypo","trans1","trans2"}. For
relative-ranking datasets the example_id is the row id, i.e.
"<id>#better" / "<id>#worse". Records are validated on load; duplicate
keys and invariant violations are rejected with their line number.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from ..data import Direction, EntityKind
from ..errors import TraceFormatError, TraceInvariantError, TraceMissing
from .base import ProbabilityBackend, ScoreRequest, TokenTrace, TraceKey


def _parse_record(obj: dict) -> tuple[TraceKey, TokenTrace]:
    try:
        example_id = str(obj["example_id"])
        direction = Direction(EntityKind(obj["from"]), EntityKind(obj["to"]))
        tokens = obj["tokens"]
        logprobs = obj["logprobs"]
        entropies = obj["entropies"]
    except KeyError as exc:
        raise ValueError(f"missing field {exc.args[0]!r}") from None
    if not all(isinstance(t, str) for t in tokens):
        raise ValueError("'tokens' must be an array of strings")
    for name, arr in (("logprobs", logprobs), ("entropies", entropies)):
        if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in arr):
            raise ValueError(f"{name!r} must be an array of numbers")
    trace = TokenTrace(tuple(tokens), tuple(float(x) for x in logprobs), tuple(float(x) for x in entropies))
    return TraceKey(example_id, direction), trace


def load_traces(path: str | Path) -> dict[TraceKey, TokenTrace]:
    """Load and validate a trace file into a store keyed by (row id, direction)."""
    store: dict[TraceKey, TokenTrace] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("record is not a JSON object")
                key, trace = _parse_record(obj)
                trace.validate()
            except (json.JSONDecodeError, ValueError, TraceInvariantError) as exc:
                raise TraceFormatError(line_no, str(exc)) from None
            if key in store:
                raise TraceFormatError(line_no, f"duplicate key ({key.example_id}, {key.direction.key})")
            store[key] = trace
    return store


def dump_trace_record(key: TraceKey, trace: TokenTrace) -> str:
    obj = {
        "example_id": key.example_id,
        "from": key.direction.from_kind.value,
        "to": key.direction.to_kind.value,
        "tokens": list(trace.tokens),
        "logprobs": list(trace.logprobs),
        "entropies": list(trace.entropies),
    }
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def save_traces(store: dict[TraceKey, TokenTrace], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, trace in store.items():
            fh.write(dump_trace_record(key, trace) + "\n")


class TraceStoreBackend(ProbabilityBackend):
    """Serves stored traces by (row id, direction); cannot score novel text."""

    name = "trace-store"
    requires_text = False

    def __init__(self, store: dict[TraceKey, TokenTrace]):
        self._store = store

    def __len__(self) -> int:
        return len(self._store)

    def forced_score(self, req: ScoreRequest) -> TokenTrace:
        raise TraceMissing("trace store lookups need an (example, direction) key, not raw text")

    def score_keyed(self, key: TraceKey, req: ScoreRequest | None) -> TokenTrace:
        try:
            return self._store[key]
        except KeyError:
            raise TraceMissing(f"no trace for ({key.example_id}, {key.direction.key})") from None

    def identity(self) -> dict:
        return {"kind": "trace-store", "records": len(self._store)}


class TraceFileBackend(TraceStoreBackend):
    """TraceStoreBackend loaded from (and identified by) a trace file."""

    name = "trace"

    def __init__(self, path: str | Path):
        self._path = str(path)
        super().__init__(load_traces(path))

    def identity(self) -> dict:
        digest = hashlib.sha256(Path(self._path).read_bytes()).hexdigest()
        return {"kind": "trace", "path": self._path, "sha256": digest, "records": len(self._store)}
