"""Command-line behavior of the export path."""

from __future__ import annotations

import json

from datscore_bridge.cli import main

from .test_export import _da, read_records, write_dataset


def test_export_command_writes_traces_and_reports(checkpoint, tmp_path, capsys):
    ds, out = tmp_path / "ds.jsonl", tmp_path / "traces.jsonl"
    write_dataset(ds, [_da("a", "le chat dort"), _da("b", "un chien court")])
    code = main([
        "export-traces", "--model", checkpoint, "--dataset", str(ds),
        "--out", str(out), "--mode", "ref4", "--max-batch", "4",
    ])
    assert code == 0
    assert "8 written, 0 skipped, 0 gap(s)" in capsys.readouterr().out
    assert len(read_records(out)) == 8


def test_export_command_reports_gaps_with_exit_1(checkpoint, tmp_path, capsys):
    ds, out = tmp_path / "ds.jsonl", tmp_path / "traces.jsonl"
    write_dataset(ds, [_da("a", "le chat dort", trans=False)])
    code = main([
        "export-traces", "--model", checkpoint, "--dataset", str(ds),
        "--out", str(out), "--mode", "ref4",
    ])
    assert code == 1
    assert "2 gap(s)" in capsys.readouterr().out
    assert len(read_records(out)) == 2  # ref directions still written


def test_export_command_maps_input_errors_to_exit_2(checkpoint, tmp_path, capsys):
    code = main([
        "export-traces", "--model", checkpoint, "--dataset", str(tmp_path / "missing.jsonl"),
        "--out", str(tmp_path / "t.jsonl"),
    ])
    assert code == 2
    assert "missing.jsonl" in capsys.readouterr().err

    bad = tmp_path / "bad.jsonl"
    bad.write_text("nope\n", encoding="utf-8")
    code = main([
        "export-traces", "--model", checkpoint, "--dataset", str(bad),
        "--out", str(tmp_path / "t.jsonl"),
    ])
    assert code == 2


def test_export_resume_via_cli_is_idempotent(checkpoint, tmp_path, capsys):
    ds, out = tmp_path / "ds.jsonl", tmp_path / "traces.jsonl"
    write_dataset(ds, [_da("a", "le chat dort")])
    argv = ["export-traces", "--model", checkpoint, "--dataset", str(ds), "--out", str(out), "--mode", "ref4"]
    assert main(argv) == 0
    first = out.read_bytes()
    assert main(argv) == 0
    assert "0 written, 4 skipped" in capsys.readouterr().out
    assert out.read_bytes() == first
