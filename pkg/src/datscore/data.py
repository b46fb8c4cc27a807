"""Domain types and the canonical JSON Lines dataset format.

One evaluation example holds a source, a reference, a hypothesis, an
optional pair of augmented translations, and an optional human judgment
(direct assessment score or relative ranking of two hypotheses).

Canonical file format (UTF-8 JSON Lines, one object per line, compact
separators, fixed field order):

    direct assessment / unlabeled:
        {"id", "src", "src_lang", "ref", "hyp", "tgt_lang"[, "human"]}
    relative ranking:
        {"id", "src", "src_lang", "ref", "hyp_better", "hyp_worse", "tgt_lang"}

Optional augmentation fields "trans1", "trans1_lang", "trans2",
"trans2_lang" are appended at the end, in that order.  Texts are stored
verbatim; only leading/trailing whitespace is trimmed at parse time.
Serializing a parsed canonical file reproduces it byte for byte.
"""

from __future__ import annotations

import enum
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

from .errors import DatasetParseError

LANG_RE = re.compile(r"^[a-z]{2,3}$")


def validate_lang(code: str) -> str:
    """Check the two-or-three-letter lowercase shape; registries are out of scope."""
    if not LANG_RE.match(code):
        raise ValueError(f"invalid language code {code!r} (want ^[a-z]{{2,3}}$)")
    return code


class EntityKind(enum.Enum):
    SRC = "src"
    REF = "ref"
    HYPO = "hypo"
    TRANS1 = "trans1"
    TRANS2 = "trans2"


@dataclass(frozen=True, slots=True)
class Entity:
    """One text participating in scoring, tagged with its role and language.

    Empty text is representable (validate_dataset reports it); the language
    code shape is enforced at construction.
    """

    kind: EntityKind
    text: str
    lang: str

    def __post_init__(self) -> None:
        validate_lang(self.lang)


@dataclass(frozen=True, slots=True)
class Direction:
    """An ordered generation pair: score the probability of `to` given `from`."""

    from_kind: EntityKind
    to_kind: EntityKind

    def __post_init__(self) -> None:
        if self.from_kind is self.to_kind:
            raise ValueError(f"direction endpoints must differ, got {self.from_kind.value}")

    @property
    def key(self) -> str:
        return f"{self.from_kind.value}->{self.to_kind.value}"

    @classmethod
    def from_key(cls, key: str) -> "Direction":
        try:
            frm, to = key.split("->")
            return cls(EntityKind(frm), EntityKind(to))
        except ValueError:
            raise ValueError(f"invalid direction key {key!r} (want e.g. 'src->hypo')") from None


@dataclass(frozen=True, slots=True)
class DirectAssessment:
    """Continuous human quality score for the example's hypothesis."""

    score: float


@dataclass(frozen=True, slots=True)
class RelativeRanking:
    """Human preference between two hypotheses for the same (src, ref)."""

    better: Entity
    worse: Entity


HumanJudgment = Union[DirectAssessment, RelativeRanking]


@dataclass(frozen=True, slots=True)
class EvalExample:
    """One segment to evaluate.

    For relative-ranking examples `hyp` aliases the human-preferred
    hypothesis; both ranked hypotheses live in `human`.
    """

    id: str
    src: Entity
    ref: Entity
    hyp: Entity
    trans1: Entity | None = None
    trans2: Entity | None = None
    human: HumanJudgment | None = None

    @property
    def is_ranking(self) -> bool:
        return isinstance(self.human, RelativeRanking)

    def entity(self, kind: EntityKind) -> Entity | None:
        return {
            EntityKind.SRC: self.src,
            EntityKind.REF: self.ref,
            EntityKind.HYPO: self.hyp,
            EntityKind.TRANS1: self.trans1,
            EntityKind.TRANS2: self.trans2,
        }[kind]

    def with_augmentations(self, trans1: Entity | None, trans2: Entity | None) -> "EvalExample":
        return EvalExample(
            id=self.id,
            src=self.src,
            ref=self.ref,
            hyp=self.hyp,
            trans1=trans1 if trans1 is not None else self.trans1,
            trans2=trans2 if trans2 is not None else self.trans2,
            human=self.human,
        )

    def to_json_obj(self) -> dict:
        obj: dict = {"id": self.id, "src": self.src.text, "src_lang": self.src.lang, "ref": self.ref.text}
        if self.is_ranking:
            rr = self.human
            assert isinstance(rr, RelativeRanking)
            obj["hyp_better"] = rr.better.text
            obj["hyp_worse"] = rr.worse.text
            obj["tgt_lang"] = self.ref.lang
        else:
            obj["hyp"] = self.hyp.text
            obj["tgt_lang"] = self.ref.lang
            if isinstance(self.human, DirectAssessment):
                obj["human"] = self.human.score
        if self.trans1 is not None:
            obj["trans1"] = self.trans1.text
            obj["trans1_lang"] = self.trans1.lang
        if self.trans2 is not None:
            obj["trans2"] = self.trans2.text
            obj["trans2_lang"] = self.trans2.lang
        return obj

    @classmethod
    def from_json_obj(cls, obj: dict) -> "EvalExample":
        try:
            ex_id = str(obj["id"])
            src = Entity(EntityKind.SRC, str(obj["src"]).strip(), str(obj["src_lang"]))
            tgt_lang = str(obj["tgt_lang"])
            ref = Entity(EntityKind.REF, str(obj["ref"]).strip(), tgt_lang)
            human: HumanJudgment | None
            if "hyp_better" in obj or "hyp_worse" in obj:
                better = Entity(EntityKind.HYPO, str(obj["hyp_better"]).strip(), tgt_lang)
                worse = Entity(EntityKind.HYPO, str(obj["hyp_worse"]).strip(), tgt_lang)
                hyp = better
                human = RelativeRanking(better, worse)
            else:
                hyp = Entity(EntityKind.HYPO, str(obj["hyp"]).strip(), tgt_lang)
                human = None
                if "human" in obj:
                    score = obj["human"]
                    if not isinstance(score, (int, float)) or isinstance(score, bool):
                        raise ValueError(f"'human' must be a number, got {score!r}")
                    human = DirectAssessment(float(score))
            trans1 = trans2 = None
            if "trans1" in obj:
                trans1 = Entity(EntityKind.TRANS1, str(obj["trans1"]).strip(), str(obj["trans1_lang"]))
            if "trans2" in obj:
                trans2 = Entity(EntityKind.TRANS2, str(obj["trans2"]).strip(), str(obj["trans2_lang"]))
        except KeyError as exc:
            raise ValueError(f"missing field {exc.args[0]!r}") from None
        return cls(id=ex_id, src=src, ref=ref, hyp=hyp, trans1=trans1, trans2=trans2, human=human)


def dumps_example(example: EvalExample) -> str:
    return json.dumps(example.to_json_obj(), ensure_ascii=False, separators=(",", ":"))


def serialize_dataset(examples: Iterable[EvalExample]) -> str:
    return "".join(dumps_example(ex) + "\n" for ex in examples)


def load_dataset(path: str | Path) -> list[EvalExample]:
    """Parse a JSON Lines dataset; malformed records raise with their line number."""
    examples = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("record is not a JSON object")
                examples.append(EvalExample.from_json_obj(obj))
            except (json.JSONDecodeError, ValueError) as exc:
                raise DatasetParseError(line_no, str(exc)) from None
    return examples


def save_dataset(examples: Iterable[EvalExample], path: str | Path) -> None:
    Path(path).write_text(serialize_dataset(examples), encoding="utf-8")


@dataclass(slots=True)
class Violation:
    example_id: str
    message: str


@dataclass(slots=True)
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return not self.violations

    def add(self, example_id: str, message: str) -> None:
        self.violations.append(Violation(example_id, message))

    def summary(self) -> str:
        if self.accepted:
            return "dataset accepted: 0 violations"
        lines = [f"dataset rejected: {len(self.violations)} violation(s)"]
        lines += [f"  [{v.example_id}] {v.message}" for v in self.violations]
        return "\n".join(lines)


def validate_dataset(examples: Iterable[EvalExample]) -> ValidationReport:
    """Check semantic invariants; the dataset is accepted iff no violations."""
    report = ValidationReport()
    seen: set[str] = set()
    for ex in examples:
        if ex.id in seen:
            report.add(ex.id, "duplicate id")
        seen.add(ex.id)
        # '#' is reserved: ranking examples expand to '<id>#better' / '<id>#worse' rows.
        if "#" in ex.id:
            report.add(ex.id, "id contains reserved character '#'")
        for ent in (ex.src, ex.ref, ex.hyp, ex.trans1, ex.trans2):
            if ent is not None and not ent.text.strip():
                report.add(ex.id, f"empty entity text ({ent.kind.value})")
        if ex.ref.lang != ex.hyp.lang:
            report.add(ex.id, f"reference/hypothesis language mismatch ({ex.ref.lang} vs {ex.hyp.lang})")
        if isinstance(ex.human, RelativeRanking):
            rr = ex.human
            if not rr.worse.text.strip():
                report.add(ex.id, "empty entity text (hypo, worse)")
            if rr.better.text == rr.worse.text:
                report.add(ex.id, "ranked hypotheses are identical")
        elif isinstance(ex.human, DirectAssessment):
            if not math.isfinite(ex.human.score):
                report.add(ex.id, "human score is not finite")
    return report
