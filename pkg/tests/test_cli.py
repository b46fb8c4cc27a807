"""End-to-end command-line behavior, including manifest reproducibility."""

from __future__ import annotations

import json

import pytest

from datscore.backends import ToyBackend, save_traces
from datscore.backends.base import TraceKey
from datscore.cli import main
from datscore.data import Direction, Entity, EntityKind, EvalExample, load_dataset, save_dataset
from datscore.fixtures import FIXTURE_CORPUS, fixture_dataset
from datscore.pipeline import AugmentPolicy, DirectionSet, Mode, augment_example, collect_traces, expand_rows

# Golden end-to-end values for the built-in fixture dataset under the toy
# backend (mt8, entropy terms, one-vs-rest averaging), frozen from
# tests/oracle.py.
GOLDEN_VALUES = {
    "fx1": -2.714136233668339,
    "fx2": -2.862741956597177,
    "fx3": -2.891031418445924,
    "fx4": -2.9980919498461924,
    "fx5": -2.9291048550467416,
    "fx6": -2.8758641231298814,
    "fx7": -2.9399742982480133,
    "fx8": -2.821520210510737,
}
GOLDEN_WEIGHTS = {
    "src->hypo": 0.1310363556235979,
    "hypo->src": 0.12410274663258614,
    "ref->hypo": 0.1264802201685513,
    "hypo->ref": 0.12931842417455497,
    "trans1->hypo": 0.13048807686372216,
    "hypo->trans1": 0.1323157326529322,
    "trans2->hypo": 0.11871933990176543,
    "hypo->trans2": 0.10753910398228986,
}


def read_scores(path):
    out = {}
    for line in path.read_text().splitlines():
        obj = json.loads(line)
        out[obj["id"]] = obj
    return out


def write_trace_file(tmp_path, mode=Mode.MT8, drop=None, name="traces.jsonl"):
    """Toy traces for the (augmented) fixture dataset, minus `drop` keys."""
    backend = ToyBackend()
    examples = [augment_example(ex, AugmentPolicy(), backend) for ex in fixture_dataset()]
    rows = [row for ex in examples for row in expand_rows(ex)]
    traces, exclusions = collect_traces(rows, DirectionSet.full(mode).directions, backend)
    assert not exclusions
    for key in drop or ():
        del traces[key]
    path = tmp_path / name
    save_traces(traces, path)
    return path


def test_score_writes_golden_values(fixture_dataset_path, tmp_path):
    out = tmp_path / "scores.jsonl"
    assert main(["score", "--dataset", str(fixture_dataset_path), "--backend", "toy", "--out", str(out)]) == 0
    scores = read_scores(out)
    assert set(scores) == set(GOLDEN_VALUES)
    for ex_id, expected in GOLDEN_VALUES.items():
        assert scores[ex_id]["datscore"] == pytest.approx(expected, abs=1e-9)
        assert set(scores[ex_id]["per_direction"]) == set(GOLDEN_WEIGHTS)

    manifest = json.loads((tmp_path / "scores.jsonl.manifest.json").read_text())
    assert manifest["tool"] == "datscore"
    assert manifest["command"] == "score"
    assert manifest["config"]["backend"] == "toy"
    assert "workers" not in manifest["config"]
    assert manifest["n_examples"] == manifest["n_rows"] == 8
    assert manifest["exclusions"] == []
    assert manifest["direction_weights"]["provenance"] == "one-vs-rest"
    for key, expected in GOLDEN_WEIGHTS.items():
        assert manifest["direction_weights"]["per_direction"][key] == pytest.approx(expected, abs=1e-9)


def test_score_stdout_mode_writes_no_files(fixture_dataset_path, tmp_path, capsys):
    before = set(tmp_path.iterdir())
    assert main(["score", "--dataset", str(fixture_dataset_path), "--backend", "toy", "--out", "-"]) == 0
    lines = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert [obj["id"] for obj in lines] == [f"fx{i}" for i in range(1, 9)]
    assert set(tmp_path.iterdir()) == before


@pytest.mark.parametrize("backend_kind", ["toy", "trace"])
def test_score_is_byte_reproducible(fixture_dataset_path, tmp_path, backend_kind):
    if backend_kind == "toy":
        backend_spec = "toy"
    else:
        backend_spec = f"trace:{write_trace_file(tmp_path)}"
    outputs = []
    for tag, workers in (("a", "1"), ("b", "8"), ("c", "1")):
        out = tmp_path / f"scores-{tag}.jsonl"
        argv = [
            "score", "--dataset", str(fixture_dataset_path), "--backend", backend_spec,
            "--out", str(out), "--workers", workers,
        ]
        assert main(argv) == 0
        outputs.append((out.read_bytes(), (tmp_path / f"scores-{tag}.jsonl.manifest.json").read_bytes()))
    assert outputs[0] == outputs[1] == outputs[2]


def test_toy_and_trace_backends_agree_byte_for_byte(fixture_dataset_path, tmp_path):
    toy_out = tmp_path / "toy.jsonl"
    trace_out = tmp_path / "trace.jsonl"
    trace_spec = f"trace:{write_trace_file(tmp_path)}"
    assert main(["score", "--dataset", str(fixture_dataset_path), "--backend", "toy", "--out", str(toy_out)]) == 0
    assert main(["score", "--dataset", str(fixture_dataset_path), "--backend", trace_spec, "--out", str(trace_out)]) == 0
    assert toy_out.read_bytes() == trace_out.read_bytes()


def test_rerun_from_manifest_reproduces_bytes(fixture_dataset_path, tmp_path):
    first = tmp_path / "first.jsonl"
    assert main(["score", "--dataset", str(fixture_dataset_path), "--backend", "toy", "--out", str(first)]) == 0
    manifest = tmp_path / "first.jsonl.manifest.json"
    second = tmp_path / "second.jsonl"
    assert main(["score", "--config", str(manifest), "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
    assert manifest.read_bytes() == (tmp_path / "second.jsonl.manifest.json").read_bytes()


def test_config_file_supplies_defaults_and_flags_win(fixture_dataset_path, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"backend": "toy", "mode": "ref4", "term_weighting": "uniform"}))
    out = tmp_path / "scores.jsonl"
    argv = [
        "score", "--dataset", str(fixture_dataset_path), "--config", str(cfg),
        "--mode", "mt8", "--out", str(out),
    ]
    assert main(argv) == 0
    manifest = json.loads((tmp_path / "scores.jsonl.manifest.json").read_text())
    assert manifest["config"]["mode"] == "mt8"  # flag beat the file
    assert manifest["config"]["term_weighting"] == "uniform"  # file filled the gap
    assert len(manifest["directions"]) == 8


def test_config_file_rejects_unknown_keys(fixture_dataset_path, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"backnd": "toy"}))
    code = main(["score", "--dataset", str(fixture_dataset_path), "--config", str(cfg), "--out", "-"])
    assert code == 2
    assert "backnd" in capsys.readouterr().err


def test_ref4_augments_only_what_it_needs(fixture_dataset_path, tmp_path):
    out = tmp_path / "scores.jsonl"
    argv = [
        "score", "--dataset", str(fixture_dataset_path), "--backend", "toy",
        "--mode", "ref4", "--out", str(out),
    ]
    assert main(argv) == 0
    scores = read_scores(out)
    assert len(scores) == 8
    assert set(scores["fx1"]["per_direction"]) == {"ref->hypo", "hypo->ref", "trans2->hypo", "hypo->trans2"}


def test_ref4_trace_backend_needs_no_translation_texts(fixture_dataset_path, tmp_path):
    spec = f"trace:{write_trace_file(tmp_path, mode=Mode.REF4)}"
    out = tmp_path / "scores.jsonl"
    argv = ["score", "--dataset", str(fixture_dataset_path), "--backend", spec, "--mode", "ref4", "--out", str(out)]
    assert main(argv) == 0
    assert len(read_scores(out)) == 8


def test_direction_filters(fixture_dataset_path, tmp_path):
    out = tmp_path / "scores.jsonl"
    argv = [
        "score", "--dataset", str(fixture_dataset_path), "--backend", "toy",
        "--exclude-directions", "hypo->trans2,trans2->hypo", "--out", str(out),
    ]
    assert main(argv) == 0
    assert len(read_scores(out)["fx1"]["per_direction"]) == 6


def _twelve_examples(tmp_path):
    examples = []
    for i in range(12):
        row = FIXTURE_CORPUS[i % len(FIXTURE_CORPUS)]
        examples.append(
            EvalExample(
                id=f"m{i}",
                src=Entity(EntityKind.SRC, row["fr"], "fr"),
                ref=Entity(EntityKind.REF, row["en"], "en"),
                hyp=Entity(EntityKind.HYPO, row["en"], "en"),
            )
        )
    path = tmp_path / "twelve.jsonl"
    save_dataset(examples, path)
    return path, examples


def test_exclusions_are_reported_and_survivors_scored(tmp_path, capsys):
    dataset_path, examples = _twelve_examples(tmp_path)
    backend = ToyBackend()
    augmented = [augment_example(ex, AugmentPolicy(), backend) for ex in examples]
    rows = [row for ex in augmented for row in expand_rows(ex)]
    traces, _ = collect_traces(rows, DirectionSet.full(Mode.MT8).directions, backend)
    del traces[TraceKey("m7", Direction.from_key("ref->hypo"))]
    trace_path = tmp_path / "holey.jsonl"
    save_traces(traces, trace_path)

    out = tmp_path / "scores.jsonl"
    argv = ["score", "--dataset", str(dataset_path), "--backend", f"trace:{trace_path}", "--out", str(out)]
    assert main(argv) == 0  # 1 of 12 is inside the exclusion budget
    assert "excluded m7" in capsys.readouterr().err
    scores = read_scores(out)
    assert len(scores) == 11 and "m7" not in scores
    manifest = json.loads((tmp_path / "scores.jsonl.manifest.json").read_text())
    assert [e["example_id"] for e in manifest["exclusions"]] == ["m7"]
    assert manifest["n_rows"] == 11


def test_too_many_exclusions_abort_with_exit_3(fixture_dataset_path, tmp_path, capsys):
    drop = [TraceKey("fx5", Direction.from_key("src->hypo"))]
    spec = f"trace:{write_trace_file(tmp_path, drop=drop)}"
    code = main(["score", "--dataset", str(fixture_dataset_path), "--backend", spec, "--out", "-"])
    assert code == 3
    assert "fx5" in capsys.readouterr().err


def test_missing_dataset_is_an_input_error(capsys):
    code = main(["score", "--dataset", "/no/such/file.jsonl", "--backend", "toy", "--out", "-"])
    assert code == 2
    assert "/no/such/file.jsonl" in capsys.readouterr().err


def test_invalid_dataset_is_an_input_error(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id":"a#1","src":"x","src_lang":"fr","ref":"y","hyp":"z","tgt_lang":"en"}\n')
    code = main(["score", "--dataset", str(bad), "--backend", "toy", "--out", "-"])
    assert code == 2
    assert "reserved" in capsys.readouterr().err


def test_unknown_backend_spec_is_an_input_error(fixture_dataset_path, capsys):
    code = main(["score", "--dataset", str(fixture_dataset_path), "--backend", "bogus", "--out", "-"])
    assert code == 2
    assert "backend spec" in capsys.readouterr().err


def test_unknown_direction_key_is_an_input_error(fixture_dataset_path, capsys):
    code = main([
        "score", "--dataset", str(fixture_dataset_path), "--backend", "toy",
        "--include-directions", "sideways", "--out", "-",
    ])
    assert code == 2
    assert "direction" in capsys.readouterr().err


def test_too_few_rows_for_one_vs_rest_is_a_data_error(tmp_path, capsys):
    path = tmp_path / "two.jsonl"
    save_dataset(fixture_dataset()[:2], path)
    code = main(["score", "--dataset", str(path), "--backend", "toy", "--out", "-"])
    assert code == 4
    assert "3 rows" in capsys.readouterr().err


def test_augment_writes_filled_dataset_and_manifest(fixture_dataset_path, tmp_path):
    out = tmp_path / "augmented.jsonl"
    assert main(["augment", "--dataset", str(fixture_dataset_path), "--backend", "toy", "--out", str(out)]) == 0
    augmented = load_dataset(out)
    assert all(ex.trans1 is not None and ex.trans2 is not None for ex in augmented)
    assert all(ex.trans1.lang == "en" and ex.trans2.lang == "es" for ex in augmented)
    manifest = json.loads((tmp_path / "augmented.jsonl.manifest.json").read_text())
    assert manifest["command"] == "augment"
    assert manifest["backend_identity"]["kind"] == "toy"

    # scoring the pre-augmented file equals scoring with on-the-fly augmentation
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert main(["score", "--dataset", str(out), "--backend", "toy", "--out", str(a)]) == 0
    assert main(["score", "--dataset", str(fixture_dataset_path), "--backend", "toy", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_augment_with_trace_backend_is_a_backend_error(fixture_dataset_path, tmp_path, capsys):
    spec = f"trace:{write_trace_file(tmp_path)}"
    out = tmp_path / "augmented.jsonl"
    code = main(["augment", "--dataset", str(fixture_dataset_path), "--backend", spec, "--out", str(out)])
    assert code == 3
    assert "cannot translate" in capsys.readouterr().err


def test_meta_eval_reports_fixture_correlation(fixture_dataset_path, tmp_path, capsys):
    scores = tmp_path / "scores.jsonl"
    assert main(["score", "--dataset", str(fixture_dataset_path), "--backend", "toy", "--out", str(scores)]) == 0
    out = tmp_path / "meta.tsv"
    argv = ["meta-eval", "--dataset", str(fixture_dataset_path), "--scores", str(scores), "--out", str(out)]
    assert main(argv) == 0

    header, row = out.read_text().splitlines()
    assert header.split("\t") == ["lang_pair", "judgments", "kind", "value", "n_used", "n_ties", "tie_policy"]
    fields = row.split("\t")
    assert fields[:3] == ["fr-en", "da", "abs-pearson"]
    assert float(fields[3]) == pytest.approx(0.6923076012435835, abs=1e-9)
    assert fields[4] == "8"

    mirror = json.loads(out.with_suffix(".json").read_text())
    assert mirror[0]["lang_pair"] == "fr-en"
    assert mirror[0]["correlation"]["n_used"] == 8

    stdout = capsys.readouterr().out
    assert "fr-en" in stdout and "abs-pearson" in stdout


def test_meta_eval_without_judgments_is_a_data_error(tmp_path, capsys):
    dataset_path, _ = _twelve_examples(tmp_path)
    scores = tmp_path / "scores.jsonl"
    assert main(["score", "--dataset", str(dataset_path), "--backend", "toy", "--out", str(scores)]) == 0
    code = main(["meta-eval", "--dataset", str(dataset_path), "--scores", str(scores)])
    assert code == 4
    assert "no human judgments" in capsys.readouterr().err


def test_ablate_writes_tables_and_manifest(fixture_dataset_path, tmp_path, capsys):
    out = tmp_path / "ablation.tsv"
    assert main(["ablate", "--dataset", str(fixture_dataset_path), "--backend", "toy", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 22
    full = lines[1].split("\t")
    assert full[:2] == ["full", "all-directions"]
    assert float(full[3]) == pytest.approx(0.6923076012435835, abs=1e-9)
    assert json.loads(out.with_suffix(".json").read_text())["full"]["label"] == "all-directions"
    assert (tmp_path / "ablation.tsv.manifest.json").exists()
    stdout = capsys.readouterr().out
    assert "all-directions" in stdout and "leave-one-out" in stdout


def test_synth_score_meta_eval_roundtrip(tmp_path):
    dataset = tmp_path / "synth.jsonl"
    traces = tmp_path / "synth-traces.jsonl"
    argv = [
        "synth", "--n", "50", "--noise", "0", "--seed", "3",
        "--dataset-out", str(dataset), "--traces-out", str(traces),
    ]
    assert main(argv) == 0
    manifest = json.loads((tmp_path / "synth.jsonl.manifest.json").read_text())
    assert manifest["command"] == "synth"
    assert manifest["n"] == 50
    import hashlib

    assert manifest["traces_out_sha256"] == hashlib.sha256(traces.read_bytes()).hexdigest()

    scores = tmp_path / "scores.jsonl"
    assert main(["score", "--dataset", str(dataset), "--backend", f"trace:{traces}", "--out", str(scores)]) == 0
    assert len(read_scores(scores)) == 100  # 50 ranked pairs -> 100 rows

    meta = tmp_path / "meta.tsv"
    assert main(["meta-eval", "--dataset", str(dataset), "--scores", str(scores), "--out", str(meta)]) == 0
    fields = meta.read_text().splitlines()[1].split("\t")
    assert fields[1] == "rr"
    assert fields[3] == repr(1.0)  # noiseless ranking is perfectly recovered
    assert fields[4] == "50"
