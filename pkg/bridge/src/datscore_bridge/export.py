"""Offline trace export: score every (row, direction) cell of a dataset.

Reads the JSON Lines dataset format (one example per line; ranking
examples carry "hyp_better"/"hyp_worse" and expand into two rows named
"<id>#better" / "<id>#worse") and appends forced-decoding records to a
JSON Lines trace file:

    {"example_id": str, "from": str, "to": str,
     "tokens": [str], "logprobs": [num], "entropies": [num]}

Directions are the hypothesis-centered sets of the scoring engine: mt8
pairs the hypothesis with source, reference, and both augmented
translations in both orientations; ref4 with reference and trans2 only.

The export is resumable: keys already present in the output file are
skipped, so rerunning on a complete file performs zero model calls.
A failing record is retried once; records that still fail (or lack the
needed entity text) are reported as gaps instead of aborting the run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import TextIO

from .errors import BridgeError, RequestError
from .model import BridgeModel, ScoreItem, Trace

MODE_DIRECTIONS = {
    "mt8": (
        ("src", "hypo"), ("hypo", "src"),
        ("ref", "hypo"), ("hypo", "ref"),
        ("trans1", "hypo"), ("hypo", "trans1"),
        ("trans2", "hypo"), ("hypo", "trans2"),
    ),
    "ref4": (("ref", "hypo"), ("hypo", "ref"), ("trans2", "hypo"), ("hypo", "trans2")),
}


@dataclass(frozen=True, slots=True)
class Row:
    """One hypothesis to score: row id plus its texts by entity name."""

    row_id: str
    entities: dict  # entity name -> (text, lang)


@dataclass(frozen=True, slots=True)
class Gap:
    row_id: str
    direction: str  # "from->to"
    reason: str


@dataclass(slots=True)
class ExportReport:
    written: int = 0
    skipped: int = 0
    gaps: list[Gap] = field(default_factory=list)

    def summary(self) -> str:
        lines = [f"export: {self.written} written, {self.skipped} skipped, {len(self.gaps)} gap(s)"]
        lines += [f"  gap [{g.row_id}] {g.direction}: {g.reason}" for g in self.gaps]
        return "\n".join(lines)


def _entity(obj: dict, line_no: int, text_field: str, lang_field: str, name: str) -> tuple[str, str]:
    try:
        return str(obj[text_field]).strip(), str(obj[lang_field])
    except KeyError as exc:
        raise BridgeError(f"dataset line {line_no}: missing field {exc.args[0]!r}") from None


def load_rows(path: str | Path) -> list[Row]:
    """Expand a dataset file into scoring rows, keeping file order."""
    rows: list[Row] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise BridgeError(f"dataset line {line_no}: {exc}") from None
            if not isinstance(obj, dict):
                raise BridgeError(f"dataset line {line_no}: record is not a JSON object")
            if "id" not in obj:
                raise BridgeError(f"dataset line {line_no}: missing field 'id'")
            ex_id = str(obj["id"])
            shared = {"src": _entity(obj, line_no, "src", "src_lang", "src")}
            shared["ref"] = _entity(obj, line_no, "ref", "tgt_lang", "ref")
            for name in ("trans1", "trans2"):
                if name in obj:
                    shared[name] = _entity(obj, line_no, name, f"{name}_lang", name)
            if "hyp_better" in obj or "hyp_worse" in obj:
                better = _entity(obj, line_no, "hyp_better", "tgt_lang", "hyp_better")
                worse = _entity(obj, line_no, "hyp_worse", "tgt_lang", "hyp_worse")
                rows.append(Row(f"{ex_id}#better", {**shared, "hypo": better}))
                rows.append(Row(f"{ex_id}#worse", {**shared, "hypo": worse}))
            else:
                rows.append(Row(ex_id, {**shared, "hypo": _entity(obj, line_no, "hyp", "tgt_lang", "hyp")}))
    return rows


def existing_keys(path: str | Path) -> set[tuple[str, str, str]]:
    """Keys already present in a partial output file; absent file is empty."""
    keys: set[tuple[str, str, str]] = set()
    if not Path(path).exists():
        return keys
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                keys.add((str(obj["example_id"]), str(obj["from"]), str(obj["to"])))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise BridgeError(f"output line {line_no} is not a trace record: {exc}") from None
    return keys


def dump_record(row_id: str, direction: tuple[str, str], trace: Trace) -> str:
    obj = {
        "example_id": row_id,
        "from": direction[0],
        "to": direction[1],
        "tokens": list(trace.tokens),
        "logprobs": list(trace.logprobs),
        "entropies": list(trace.entropies),
    }
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def _cell_item(row: Row, direction: tuple[str, str]) -> ScoreItem:
    for name in direction:
        if name not in row.entities or not row.entities[name][0]:
            raise RequestError(f"entity {name!r} is missing or empty")
    frm, to = row.entities[direction[0]], row.entities[direction[1]]
    return ScoreItem(frm[0], frm[1], to[0], to[1])


def _flush_batch(
    model: BridgeModel,
    batch: list[tuple[Row, tuple[str, str], ScoreItem]],
    out: TextIO,
    report: ExportReport,
) -> None:
    if not batch:
        return
    try:
        traces: list[Trace | None] = list(model.score_batch([item for _, _, item in batch]))
    except Exception:
        # Retry each record once on its own; leftovers become gaps.
        traces = []
        for row, direction, item in batch:
            try:
                traces.append(model.score_batch([item])[0])
            except Exception as exc:
                traces.append(None)
                report.gaps.append(Gap(row.row_id, f"{direction[0]}->{direction[1]}", str(exc)))
    for (row, direction, _), trace in zip(batch, traces):
        if trace is None:
            continue
        out.write(dump_record(row.row_id, direction, trace) + "\n")
        report.written += 1
    out.flush()


def export_traces(
    model: BridgeModel,
    dataset_path: str | Path,
    out_path: str | Path,
    mode: str = "mt8",
    max_batch: int = 8,
) -> ExportReport:
    """Score every missing (row, direction) cell and append it to out_path."""
    if mode not in MODE_DIRECTIONS:
        raise BridgeError(f"unknown mode {mode!r} (want one of {sorted(MODE_DIRECTIONS)})")
    directions = MODE_DIRECTIONS[mode]
    rows = load_rows(dataset_path)
    done = existing_keys(out_path)
    report = ExportReport()
    batch: list[tuple[Row, tuple[str, str], ScoreItem]] = []
    with open(out_path, "a", encoding="utf-8") as out:
        for row in rows:
            for direction in directions:
                if (row.row_id, direction[0], direction[1]) in done:
                    report.skipped += 1
                    continue
                try:
                    item = _cell_item(row, direction)
                except RequestError as exc:
                    report.gaps.append(Gap(row.row_id, f"{direction[0]}->{direction[1]}", str(exc)))
                    continue
                batch.append((row, direction, item))
                if len(batch) >= max_batch:
                    _flush_batch(model, batch, out, report)
                    batch = []
        _flush_batch(model, batch, out, report)
    return report
