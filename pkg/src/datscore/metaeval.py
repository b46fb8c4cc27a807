"""Meta-evaluation: correlating metric output with human judgments.

Ranking judgments are scored with a sign-test style tau over
(better, worse) score pairs: tau = (C - D) / (C + D). Direct-assessment
judgments are scored with the absolute Pearson correlation |r|.

The ablation report reruns the weighting variants (single direction,
leave one direction out, term-weighting x direction-averaging grid)
against one shared trace cache, so the backend is consulted exactly once
per (row, direction) cell.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Mapping, Sequence

from .backends.base import ProbabilityBackend
from .data import DirectAssessment, Direction, EntityKind, EvalExample, RelativeRanking
from .errors import InsufficientData, PipelineAborted, ZeroVariance
from .pipeline import (
    MAX_EXCLUSION_FRACTION,
    AugmentPolicy,
    Averaging,
    DirectionSet,
    Mode,
    ScoreMatrix,
    augment_example,
    collect_traces,
    datscore_values,
    expand_rows,
    matrix_from_traces,
    one_vs_rest_weights,
    uniform_direction_weights,
)
from .scoring import WeightScheme


class CorrelationKind(enum.Enum):
    KENDALL_TAU_LIKE = "kendall-tau-like"
    ABS_PEARSON = "abs-pearson"


class TiePolicy(enum.Enum):
    DISCORDANT = "discordant"
    EXCLUDED = "excluded"


@dataclass(frozen=True, slots=True)
class CorrelationResult:
    kind: CorrelationKind
    value: float
    n_used: int
    n_ties: int | None = None
    tie_policy: TiePolicy | None = None

    def to_json_obj(self) -> dict:
        obj: dict = {"kind": self.kind.value, "value": self.value, "n_used": self.n_used}
        if self.kind is CorrelationKind.KENDALL_TAU_LIKE:
            obj["n_ties"] = self.n_ties
            obj["tie_policy"] = self.tie_policy.value if self.tie_policy else None
        return obj


def kendall_tau_like(
    pairs: Sequence[tuple[float, float]],
    tie_policy: TiePolicy = TiePolicy.DISCORDANT,
) -> CorrelationResult:
    """tau over (score_for_better, score_for_worse) pairs.

    Concordant means the metric agrees with the human preference. Ties
    either count against the metric (DISCORDANT) or are dropped
    (EXCLUDED); tau = (C - D) / (C + D) over the pairs kept.
    """
    concordant = discordant = ties = 0
    for better, worse in pairs:
        if better > worse:
            concordant += 1
        elif better < worse:
            discordant += 1
        else:
            ties += 1
    if tie_policy is TiePolicy.DISCORDANT:
        discordant += ties
    used = concordant + discordant
    if used == 0:
        raise InsufficientData("no usable pairs for tau")
    tau = (concordant - discordant) / used
    return CorrelationResult(CorrelationKind.KENDALL_TAU_LIKE, tau, used, ties, tie_policy)


def abs_pearson(points: Sequence[tuple[float, float]]) -> CorrelationResult:
    """|r| of the product-moment correlation between metric and human scores."""
    n = len(points)
    if n < 3:
        raise InsufficientData(f"|r| needs >= 3 points, got {n}")
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVariance("a coordinate has zero variance")
    sxy = sum((x - mx) * (y - my) for x, y in points)
    r = sxy / (sxx * syy) ** 0.5
    return CorrelationResult(CorrelationKind.ABS_PEARSON, min(abs(r), 1.0), n)


def judgment_correlation(
    examples: Sequence[EvalExample],
    values: Mapping[str, float],
    tie_policy: TiePolicy = TiePolicy.DISCORDANT,
) -> CorrelationResult:
    """Correlate metric values (keyed by scoring row id) with human judgments.

    Ranking pairs take precedence when both judgment kinds are present;
    datasets carrying only direct assessments fall back to |r|.
    """
    pairs = []
    points = []
    for ex in examples:
        if isinstance(ex.human, RelativeRanking):
            better, worse = f"{ex.id}#better", f"{ex.id}#worse"
            if better in values and worse in values:
                pairs.append((values[better], values[worse]))
        elif isinstance(ex.human, DirectAssessment):
            if ex.id in values:
                points.append((values[ex.id], ex.human.score))
    if pairs:
        return kendall_tau_like(pairs, tie_policy)
    if points:
        return abs_pearson(points)
    raise InsufficientData("no examples with human judgments were scored")


def grouped_correlations(
    examples: Sequence[EvalExample],
    values: Mapping[str, float],
    tie_policy: TiePolicy = TiePolicy.DISCORDANT,
) -> list[tuple[str, str, CorrelationResult]]:
    """One correlation per (language pair, judgment kind) group.

    Returns (lang_pair, kind label, result) tuples in first-seen order.
    """
    groups: dict[tuple[str, str], list[EvalExample]] = {}
    for ex in examples:
        if ex.human is None:
            continue
        kind = "rr" if isinstance(ex.human, RelativeRanking) else "da"
        groups.setdefault((f"{ex.src.lang}-{ex.hyp.lang}", kind), []).append(ex)
    out = []
    for (lang_pair, kind), members in groups.items():
        out.append((lang_pair, kind, judgment_correlation(members, values, tie_policy)))
    return out


@dataclass(frozen=True, slots=True)
class AblationCell:
    """One ablation configuration and its correlation with the humans."""

    section: str
    label: str
    config: dict
    correlation: CorrelationResult

    def to_json_obj(self) -> dict:
        return {
            "section": self.section,
            "label": self.label,
            "config": self.config,
            "correlation": self.correlation.to_json_obj(),
        }


@dataclass(frozen=True, slots=True)
class AblationReport:
    full: AblationCell
    single_direction: tuple[AblationCell, ...]
    leave_one_out: tuple[AblationCell, ...]
    grid: tuple[AblationCell, ...]

    def cells(self) -> list[AblationCell]:
        return [self.full, *self.single_direction, *self.leave_one_out, *self.grid]

    def to_json_obj(self) -> dict:
        return {
            "full": self.full.to_json_obj(),
            "single_direction": [c.to_json_obj() for c in self.single_direction],
            "leave_one_out": [c.to_json_obj() for c in self.leave_one_out],
            "grid": [c.to_json_obj() for c in self.grid],
        }


def ablation_report(
    examples: Sequence[EvalExample],
    backend: ProbabilityBackend,
    mode: Mode = Mode.MT8,
    scheme: WeightScheme = WeightScheme.ENTROPY,
    averaging: Averaging = Averaging.ONE_VS_REST,
    normalize_terms: bool = True,
    tie_policy: TiePolicy = TiePolicy.DISCORDANT,
    workers: int | None = None,
    policy: AugmentPolicy = AugmentPolicy(),
) -> AblationReport:
    """Correlations for every weighting variant, off one trace cache."""
    direction_set = DirectionSet.full(mode)
    need_aug = [k for k in (EntityKind.TRANS1, EntityKind.TRANS2) if k in direction_set.needed_kinds]
    if need_aug and backend.supports_translate:
        examples = [augment_example(ex, policy, backend, need_aug) for ex in examples]
    rows = [row for ex in examples for row in expand_rows(ex)]
    traces, exclusions = collect_traces(rows, direction_set.directions, backend, workers)
    if exclusions and len(exclusions) / len(examples) > MAX_EXCLUSION_FRACTION:
        raise PipelineAborted(f"excluded {len(exclusions)} of {len(examples)} examples")
    matrices = {
        s: matrix_from_traces(rows, direction_set.directions, traces, s, normalize_terms)
        for s in WeightScheme
    }

    def cell(section: str, label: str, matrix: ScoreMatrix, s: WeightScheme, avg: Averaging) -> AblationCell:
        # A single column admits no correlation weighting; tag what actually ran.
        if avg is Averaging.ONE_VS_REST and len(matrix.directions) < 2:
            avg = Averaging.UNIFORM
        if avg is Averaging.ONE_VS_REST:
            weights = one_vs_rest_weights(matrix)
        else:
            weights = uniform_direction_weights(matrix.directions)
        corr = judgment_correlation(examples, datscore_values(matrix, weights), tie_policy)
        config = {
            "mode": mode.value,
            "directions": [d.key for d in matrix.directions],
            "term_weighting": s.value,
            "averaging": avg.value,
            "raw_sum": not normalize_terms,
            "tie_policy": tie_policy.value,
        }
        return AblationCell(section, label, config, corr)

    base = matrices[scheme]
    full = cell("full", "all-directions", base, scheme, averaging)
    single = tuple(
        cell("single-direction", d.key, base.select([d]), scheme, averaging)
        for d in direction_set.directions
    )
    loo = tuple(
        cell(
            "leave-one-out",
            f"without {d.key}",
            base.select([o for o in direction_set.directions if o != d]),
            scheme,
            averaging,
        )
        for d in direction_set.directions
    )
    grid = tuple(
        cell("grid", f"term={s.value} avg={avg.value}", matrices[s], s, avg)
        for s in (WeightScheme.UNIFORM, WeightScheme.ENTROPY)
        for avg in (Averaging.UNIFORM, Averaging.ONE_VS_REST)
    )
    return AblationReport(full, single, loo, grid)


_TSV_HEADER = ("section", "label", "kind", "value", "n_used", "n_ties", "tie_policy", "config")


def _cell_fields(c: AblationCell) -> tuple[str, ...]:
    r = c.correlation
    return (
        c.section,
        c.label,
        r.kind.value,
        repr(r.value),
        str(r.n_used),
        "" if r.n_ties is None else str(r.n_ties),
        "" if r.tie_policy is None else r.tie_policy.value,
        json.dumps(c.config, separators=(",", ":")),
    )


def render_tsv(report: AblationReport) -> str:
    lines = ["\t".join(_TSV_HEADER)]
    lines += ["\t".join(_cell_fields(c)) for c in report.cells()]
    return "\n".join(lines) + "\n"


def render_json(report: AblationReport) -> str:
    return json.dumps(report.to_json_obj(), ensure_ascii=False, indent=2) + "\n"


def render_text(report: AblationReport) -> str:
    rows = [_TSV_HEADER[:7]] + [_cell_fields(c)[:7] for c in report.cells()]
    widths = [max(len(r[i]) for r in rows) for i in range(7)]
    out = []
    for r in rows:
        out.append("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip())
    return "\n".join(out) + "\n"
