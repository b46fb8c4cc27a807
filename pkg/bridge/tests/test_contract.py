"""Cross-component contract: the bridge as seen by the scoring engine.

These tests exercise the bridge through the consumer's own code paths:
trace records must satisfy the consumer's TokenTrace invariants, an
exported file must load through its trace reader with zero violations,
and the HTTP service must be drivable end to end by its batching HTTP
client over a real socket.
"""

from __future__ import annotations

import json
import random
import threading
import time

import pytest
from fastapi.testclient import TestClient

from datscore.backends.base import TokenTrace
from datscore.backends.http import HttpBackend
from datscore.backends.tracefile import load_traces

from datscore_bridge.config import BridgeConfig
from datscore_bridge.export import export_traces
from datscore_bridge.service import create_app

from .test_export import _da, _rr, write_dataset

PROBES = [
    ("the cat sat on the mat", "en", "fr"),
    ("a dog ran across the field", "en", "fr"),
    ("the sun rises over the river", "en", "es"),
    ("she reads an old book", "en", "de"),
    ("rain fell on the roof", "en", "fr"),
    ("le soleil brille sur la mer", "fr", "en"),
    ("un chien court dans le jardin", "fr", "en"),
    ("el gato duerme en la casa", "es", "en"),
    ("das kind singt ein lied", "de", "en"),
    ("bread and cheese make a meal", "en", "es"),
]


@pytest.fixture()
def client(model):
    config = BridgeConfig(model="unused", max_batch=8, queue_size=32, max_new_tokens=12)
    with TestClient(create_app(config, model=model)) as c:
        yield c


def test_score_responses_satisfy_trace_invariants(client, model):
    items = [
        {"input_text": t, "input_lang": sl, "output_text": "le chat dort sur le tapis", "output_lang": "fr"}
        for t, sl, _ in PROBES[:5]
    ]
    for obj in [client.post("/v1/score", json=items[0]).json()] + client.post("/v1/score", json=items).json():
        trace = TokenTrace(tuple(obj["tokens"]), tuple(obj["logprobs"]), tuple(obj["entropies"]))
        trace.validate(vocab_size=model.vocab_size)


def test_exported_traces_load_with_zero_violations(model, tmp_path):
    ds, out = tmp_path / "ds.jsonl", tmp_path / "traces.jsonl"
    write_dataset(ds, [_da("a", "le chat dort"), _da("b", "un chien court"), _rr("p")])
    report = export_traces(model, ds, out, mode="mt8")
    assert not report.gaps
    store = load_traces(out)  # raises on any invariant or format violation
    assert len(store) == report.written == 4 * 8


def test_exported_traces_drive_the_scoring_pipeline(model, tmp_path):
    from datscore.backends.tracefile import TraceFileBackend
    from datscore.data import load_dataset
    from datscore.pipeline import DirectionSet, Mode, run_pipeline

    ds, out = tmp_path / "ds.jsonl", tmp_path / "traces.jsonl"
    rows = [_da("a", "le chat dort"), _da("b", "un chien court"), _da("c", "la lune monte")]
    write_dataset(ds, rows)
    export_traces(model, ds, out, mode="mt8")
    result = run_pipeline(
        load_dataset(ds), TraceFileBackend(out), DirectionSet.full(Mode.MT8), workers=1
    )
    assert sorted(result.values) == ["a", "b", "c"]
    assert all(v < 0 for v in result.values.values())


def test_greedy_translation_beats_shuffled_tokens(client, model):
    rng = random.Random(7)
    wins = 0
    for text, src_lang, tgt_lang in PROBES:
        translation = client.post(
            "/v1/translate", json={"text": text, "src_lang": src_lang, "tgt_lang": tgt_lang}
        ).json()["translation"]
        pieces = model.tokenizer.tokenize(translation)
        assert len(pieces) >= 2
        shuffled = pieces[:]
        rng.shuffle(shuffled)
        if shuffled == pieces:
            shuffled = pieces[1:] + pieces[:1]
        shuffled_text = model.tokenizer.convert_tokens_to_string(shuffled).strip()
        pair = client.post(
            "/v1/score",
            json=[
                {"input_text": text, "input_lang": src_lang, "output_text": translation, "output_lang": tgt_lang},
                {"input_text": text, "input_lang": src_lang, "output_text": shuffled_text, "output_lang": tgt_lang},
            ],
        ).json()
        wins += sum(pair[0]["logprobs"]) > sum(pair[1]["logprobs"])
    assert wins >= 9


# -- over a real socket, through the consumer's batching client ----------------


@pytest.fixture()
def served(model):
    import uvicorn

    config = BridgeConfig(model="unused", max_batch=8, queue_size=64, max_new_tokens=12)
    app = create_app(config, model=model)
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 15
    while not server.started:
        if time.monotonic() > deadline:
            raise AssertionError("server did not start")
        time.sleep(0.02)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=10)


def test_http_backend_roundtrip(served, model):
    from datscore.backends.base import ScoreRequest

    with HttpBackend(served, batch_size=8) as backend:
        trace = backend.forced_score(ScoreRequest("the cat sat", "en", "le chat dort", "fr"))
        trace.validate(vocab_size=model.vocab_size)
        assert list(trace.tokens) == model.tokenizer.tokenize("le chat dort")
        translation = backend.translate("the cat sat on the mat", "en", "fr")
        assert translation.strip()


def test_full_pipeline_over_http(served):
    from datscore.data import EvalExample
    from datscore.pipeline import DirectionSet, Mode, run_pipeline

    examples = [
        EvalExample.from_json_obj(_da("a", "le chat dort")),
        EvalExample.from_json_obj(_da("b", "un chien court")),
        EvalExample.from_json_obj(_da("c", "la lune monte", trans=False)),  # augmented on the fly
    ]
    with HttpBackend(served, batch_size=8) as backend:
        result = run_pipeline(examples, backend, DirectionSet.full(Mode.MT8), workers=4)
    assert sorted(result.values) == ["a", "b", "c"]
    assert not result.exclusions
    assert result.matrix.values.shape == (3, 8)
