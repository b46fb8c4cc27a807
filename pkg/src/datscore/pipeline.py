"""Two-pass scoring pipeline.

Pass 1 fills a dense score matrix: every scoring row (one per hypothesis;
ranking examples contribute a "<id>#better" and a "<id>#worse" row) is
forced-decoded in every active direction. Pass 2 derives one-vs-rest
direction weights from the matrix columns and combines each row's
per-direction scores into its final value.

Directions are always centered on the hypothesis. mt8 connects it with
source, reference, and both augmented translations in both orientations;
ref4 uses only reference and trans2.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .backends.base import ProbabilityBackend, ScoreRequest, TokenTrace, TraceKey
from .data import Direction, Entity, EntityKind, EvalExample, RelativeRanking, validate_lang
from .errors import DatasetError, DatscoreError, InsufficientData, PipelineAborted
from .scoring import WeightScheme, score_trace

# A run aborts when the excluded fraction of examples exceeds this.
MAX_EXCLUSION_FRACTION = 0.10

_WEIGHT_TOL = 1e-9


class Mode(enum.Enum):
    MT8 = "mt8"
    REF4 = "ref4"


def _dirs(*keys: str) -> tuple[Direction, ...]:
    return tuple(Direction.from_key(k) for k in keys)


_MT8_DIRECTIONS = _dirs(
    "src->hypo", "hypo->src",
    "ref->hypo", "hypo->ref",
    "trans1->hypo", "hypo->trans1",
    "trans2->hypo", "hypo->trans2",
)
_REF4_DIRECTIONS = _dirs("ref->hypo", "hypo->ref", "trans2->hypo", "hypo->trans2")
_CANONICAL = {Mode.MT8: _MT8_DIRECTIONS, Mode.REF4: _REF4_DIRECTIONS}


@dataclass(frozen=True, slots=True)
class DirectionSet:
    """The active directions of a run, in canonical order.

    Always a subset of the mode's full set; `full` gives the unfiltered
    mode (8 directions for mt8, 4 for ref4).
    """

    mode: Mode
    directions: tuple[Direction, ...]

    def __post_init__(self) -> None:
        full = _CANONICAL[self.mode]
        if not self.directions:
            raise ValueError("direction set is empty")
        if len(set(self.directions)) != len(self.directions):
            raise ValueError("duplicate directions")
        for d in self.directions:
            if d not in full:
                raise ValueError(f"direction {d.key!r} is not part of mode {self.mode.value}")
        if tuple(sorted(self.directions, key=full.index)) != self.directions:
            raise ValueError("directions must be in canonical order")

    @classmethod
    def full(cls, mode: Mode) -> "DirectionSet":
        return cls(mode, _CANONICAL[mode])

    @classmethod
    def resolve(
        cls,
        mode: Mode,
        include: Sequence[str] | None = None,
        exclude: Sequence[str] | None = None,
    ) -> "DirectionSet":
        """Subset the mode's directions by key; include applies before exclude."""
        full = _CANONICAL[mode]
        chosen = list(full)
        if include:
            wanted = {Direction.from_key(k) for k in include}
            unknown = wanted - set(full)
            if unknown:
                keys = ", ".join(sorted(d.key for d in unknown))
                raise ValueError(f"directions not in mode {mode.value}: {keys}")
            chosen = [d for d in chosen if d in wanted]
        if exclude:
            dropped = {Direction.from_key(k) for k in exclude}
            chosen = [d for d in chosen if d not in dropped]
        if not chosen:
            raise ValueError("direction filters left no directions")
        return cls(mode, tuple(chosen))

    @property
    def needed_kinds(self) -> frozenset[EntityKind]:
        kinds = set()
        for d in self.directions:
            kinds.add(d.from_kind)
            kinds.add(d.to_kind)
        return frozenset(kinds)

    def __iter__(self):
        return iter(self.directions)

    def __len__(self) -> int:
        return len(self.directions)


@dataclass(frozen=True, slots=True)
class AugmentPolicy:
    """Target languages for the two augmented translations.

    Defaults follow the hypothesis language: evaluating English output
    pivots through English+Spanish; evaluating from English pivots
    through Spanish+English; otherwise both pivots are English (the
    best-resourced choice). Explicit languages override.
    """

    trans1_lang: str | None = None
    trans2_lang: str | None = None

    def __post_init__(self) -> None:
        for code in (self.trans1_lang, self.trans2_lang):
            if code is not None:
                validate_lang(code)

    def resolve(self, src_lang: str, hyp_lang: str) -> tuple[str, str]:
        if hyp_lang == "en":
            t1, t2 = "en", "es"
        elif src_lang == "en":
            t1, t2 = "es", "en"
        else:
            t1, t2 = "en", "en"
        return (self.trans1_lang or t1, self.trans2_lang or t2)


def _attach_id(exc: DatscoreError, example_id: str) -> DatscoreError:
    try:
        return type(exc)(f"{example_id}: {exc}")
    except TypeError:
        return exc


def augment_example(
    example: EvalExample,
    policy: AugmentPolicy,
    backend: ProbabilityBackend,
    need: Iterable[EntityKind] = (EntityKind.TRANS1, EntityKind.TRANS2),
) -> EvalExample:
    """Fill missing trans1/trans2 by translating source/reference.

    Pre-existing fields are kept untouched; if nothing is missing the
    example is returned unchanged with zero backend calls.
    """
    need = set(need)
    want1 = EntityKind.TRANS1 in need and example.trans1 is None
    want2 = EntityKind.TRANS2 in need and example.trans2 is None
    if not (want1 or want2):
        return example
    t1_lang, t2_lang = policy.resolve(example.src.lang, example.hyp.lang)
    trans1 = trans2 = None
    try:
        if want1:
            text = backend.translate(example.src.text, example.src.lang, t1_lang)
            trans1 = Entity(EntityKind.TRANS1, text, t1_lang)
        if want2:
            text = backend.translate(example.ref.text, example.ref.lang, t2_lang)
            trans2 = Entity(EntityKind.TRANS2, text, t2_lang)
    except DatscoreError as exc:
        raise _attach_id(exc, example.id) from exc
    return example.with_augmentations(trans1, trans2)


@dataclass(frozen=True, slots=True)
class ScoringRow:
    """One hypothesis to score; ranking examples expand into two rows."""

    row_id: str
    example_id: str
    entities: Mapping[EntityKind, Entity | None]


def expand_rows(example: EvalExample) -> tuple[ScoringRow, ...]:
    shared = {
        EntityKind.SRC: example.src,
        EntityKind.REF: example.ref,
        EntityKind.TRANS1: example.trans1,
        EntityKind.TRANS2: example.trans2,
    }
    if isinstance(example.human, RelativeRanking):
        rr = example.human
        return (
            ScoringRow(f"{example.id}#better", example.id, {**shared, EntityKind.HYPO: rr.better}),
            ScoringRow(f"{example.id}#worse", example.id, {**shared, EntityKind.HYPO: rr.worse}),
        )
    return (ScoringRow(example.id, example.id, {**shared, EntityKind.HYPO: example.hyp}),)


@dataclass(frozen=True, slots=True)
class Exclusion:
    example_id: str
    direction: Direction
    reason: str

    def to_json_obj(self) -> dict:
        return {"example_id": self.example_id, "direction": self.direction.key, "reason": self.reason}


def _cell_request(row: ScoringRow, direction: Direction) -> ScoreRequest | None:
    frm = row.entities.get(direction.from_kind)
    to = row.entities.get(direction.to_kind)
    if frm is None or to is None or not frm.text.strip() or not to.text.strip():
        return None
    return ScoreRequest(frm.text, frm.lang, to.text, to.lang)


def collect_traces(
    rows: Sequence[ScoringRow],
    directions: Sequence[Direction],
    backend: ProbabilityBackend,
    workers: int | None = None,
) -> tuple[dict[TraceKey, TokenTrace], list[Exclusion]]:
    """Fill every (row, direction) cell; failing examples become exclusions.

    Results are keyed deterministically regardless of worker count or
    completion order. Any cell failure excludes the whole example (all of
    its rows), keeping the matrix dense and ranking pairs intact.
    """
    cells: list[tuple[TraceKey, ScoreRequest | None, str]] = []
    exclusions: list[Exclusion] = []
    failed: set[str] = set()
    for row in rows:
        for d in directions:
            key = TraceKey(row.row_id, d)
            req = _cell_request(row, d)
            if req is None and backend.requires_text:
                if row.example_id not in failed:
                    failed.add(row.example_id)
                    exclusions.append(Exclusion(row.example_id, d, "missing or empty entity text"))
                continue
            cells.append((key, req, row.example_id))

    traces: dict[TraceKey, TokenTrace] = {}

    def run_cell(cell: tuple[TraceKey, ScoreRequest | None, str]) -> TokenTrace:
        key, req, _ = cell
        return backend.score_keyed(key, req)

    max_workers = max(1, workers) if workers else None
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = [pool.submit(run_cell, cell) for cell in cells]
        for (key, _, example_id), fut in zip(cells, futures):
            try:
                traces[key] = fut.result()
            except DatscoreError as exc:
                if example_id not in failed:
                    failed.add(example_id)
                    exclusions.append(Exclusion(example_id, key.direction, str(exc)))
    if failed:
        traces = {k: v for k, v in traces.items() if k.example_id.split("#", 1)[0] not in failed}
    return traces, exclusions


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    """Dense rows x directions matrix of per-direction scores."""

    row_ids: tuple[str, ...]
    directions: tuple[Direction, ...]
    values: np.ndarray  # float64, shape (len(row_ids), len(directions))

    def __post_init__(self) -> None:
        if self.values.shape != (len(self.row_ids), len(self.directions)):
            raise ValueError(
                f"matrix shape {self.values.shape} does not match "
                f"{len(self.row_ids)} rows x {len(self.directions)} directions"
            )

    def column(self, direction: Direction) -> np.ndarray:
        return self.values[:, self.directions.index(direction)]

    def cell(self, row_id: str, direction: Direction) -> float:
        return float(self.values[self.row_ids.index(row_id), self.directions.index(direction)])

    def select(self, directions: Sequence[Direction]) -> "ScoreMatrix":
        idx = [self.directions.index(d) for d in directions]
        return ScoreMatrix(self.row_ids, tuple(directions), self.values[:, idx])


def matrix_from_traces(
    rows: Sequence[ScoringRow],
    directions: Sequence[Direction],
    traces: Mapping[TraceKey, TokenTrace],
    scheme: WeightScheme,
    normalize_terms: bool = True,
) -> ScoreMatrix:
    """Score every cached trace under `scheme`; rows missing cells are dropped."""
    kept: list[str] = []
    data: list[list[float]] = []
    for row in rows:
        keys = [TraceKey(row.row_id, d) for d in directions]
        if not all(k in traces for k in keys):
            continue
        kept.append(row.row_id)
        data.append([score_trace(traces[k], scheme, normalize_terms) for k in keys])
    values = np.asarray(data, dtype=np.float64).reshape(len(kept), len(directions))
    return ScoreMatrix(tuple(kept), tuple(directions), values)


class WeightProvenance(enum.Enum):
    ONE_VS_REST = "one-vs-rest"
    UNIFORM_AVG = "uniform-avg"


@dataclass(frozen=True, slots=True)
class DirectionWeights:
    """Convex weights over directions plus how they were obtained."""

    per_direction: Mapping[Direction, float]
    provenance: WeightProvenance

    def __post_init__(self) -> None:
        total = 0.0
        for d, w in self.per_direction.items():
            if not (w >= 0.0):
                raise ValueError(f"negative weight for {d.key}: {w}")
            total += w
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"weights sum to {total}, expected 1")

    def vector(self, directions: Sequence[Direction]) -> np.ndarray:
        return np.asarray([self.per_direction[d] for d in directions], dtype=np.float64)

    def to_json_obj(self) -> dict:
        return {
            "provenance": self.provenance.value,
            "per_direction": {d.key: w for d, w in self.per_direction.items()},
        }


def uniform_direction_weights(directions: Sequence[Direction]) -> DirectionWeights:
    w = 1.0 / len(directions)
    return DirectionWeights({d: w for d in directions}, WeightProvenance.UNIFORM_AVG)


def one_vs_rest_weights(matrix: ScoreMatrix) -> DirectionWeights:
    """Weight each direction by its summed correlation with the others.

    A direction's raw weight is the sum of Pearson correlations of its
    score column with every other column; zero-variance columns
    correlate 0 with everything. Raw weights are clamped at 0 from below
    and normalized. If clamping kills every weight the result falls back
    to uniform averaging.
    """
    n_rows, n_dirs = matrix.values.shape
    if n_rows < 3:
        raise InsufficientData(f"one-vs-rest weights need >= 3 rows, got {n_rows}")
    if n_dirs < 2:
        raise InsufficientData(f"one-vs-rest weights need >= 2 directions, got {n_dirs}")
    centered = matrix.values - matrix.values.mean(axis=0)
    norms = np.sqrt((centered * centered).sum(axis=0))
    raw = np.zeros(n_dirs)
    for i in range(n_dirs):
        if norms[i] == 0.0:
            continue
        for j in range(n_dirs):
            if j == i or norms[j] == 0.0:
                continue
            raw[i] += float(centered[:, i] @ centered[:, j]) / (norms[i] * norms[j])
    clamped = np.maximum(raw, 0.0)
    total = float(clamped.sum())
    if total == 0.0:
        return uniform_direction_weights(matrix.directions)
    per = {d: float(clamped[i] / total) for i, d in enumerate(matrix.directions)}
    return DirectionWeights(per, WeightProvenance.ONE_VS_REST)


def datscore_values(matrix: ScoreMatrix, weights: DirectionWeights) -> dict[str, float]:
    """Final per-row score: the weighted average of the direction columns."""
    combined = matrix.values @ weights.vector(matrix.directions)
    return {row_id: float(v) for row_id, v in zip(matrix.row_ids, combined)}


class Averaging(enum.Enum):
    ONE_VS_REST = "one-vs-rest"
    UNIFORM = "uniform"


@dataclass(frozen=True, eq=False)
class PipelineResult:
    direction_set: DirectionSet
    rows: tuple[ScoringRow, ...]
    traces: dict[TraceKey, TokenTrace]
    matrix: ScoreMatrix
    weights: DirectionWeights
    values: dict[str, float]
    exclusions: list[Exclusion] = field(default_factory=list)


def run_pipeline(
    examples: Sequence[EvalExample],
    backend: ProbabilityBackend,
    direction_set: DirectionSet,
    scheme: WeightScheme = WeightScheme.ENTROPY,
    averaging: Averaging = Averaging.ONE_VS_REST,
    normalize_terms: bool = True,
    workers: int | None = None,
    policy: AugmentPolicy = AugmentPolicy(),
) -> PipelineResult:
    """Augment, score all cells, weight directions, combine.

    Raises PipelineAborted when more than MAX_EXCLUSION_FRACTION of the
    examples fail to score.
    """
    if not examples:
        raise DatasetError("dataset is empty")
    needed = direction_set.needed_kinds
    need_aug = [k for k in (EntityKind.TRANS1, EntityKind.TRANS2) if k in needed]
    if need_aug:
        if backend.supports_translate:
            examples = [augment_example(ex, policy, backend, need_aug) for ex in examples]
        elif backend.requires_text:
            missing = sum(1 for ex in examples if any(ex.entity(k) is None for k in need_aug))
            if missing:
                raise DatasetError(
                    f"{missing} example(s) lack {'/'.join(k.value for k in need_aug)} and "
                    f"backend {backend.name!r} cannot translate; augment the dataset first"
                )

    rows = [row for ex in examples for row in expand_rows(ex)]
    traces, exclusions = collect_traces(rows, direction_set.directions, backend, workers)
    if exclusions:
        if len(exclusions) / len(examples) > MAX_EXCLUSION_FRACTION:
            detail = "; ".join(f"{e.example_id}: {e.reason}" for e in exclusions[:5])
            raise PipelineAborted(
                f"excluded {len(exclusions)} of {len(examples)} examples "
                f"(> {MAX_EXCLUSION_FRACTION:.0%} allowed): {detail}"
            )
        excluded_ids = {e.example_id for e in exclusions}
        rows = [r for r in rows if r.example_id not in excluded_ids]

    matrix = matrix_from_traces(rows, direction_set.directions, traces, scheme, normalize_terms)
    if averaging is Averaging.ONE_VS_REST:
        weights = one_vs_rest_weights(matrix)
    else:
        weights = uniform_direction_weights(matrix.directions)
    values = datscore_values(matrix, weights)
    return PipelineResult(
        direction_set=direction_set,
        rows=tuple(rows),
        traces=traces,
        matrix=matrix,
        weights=weights,
        values=values,
        exclusions=exclusions,
    )
