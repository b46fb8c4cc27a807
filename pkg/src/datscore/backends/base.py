"""Backend interface and the trace record it produces.

All log-probabilities and entropies are in nats. A trace is raw model
output: any weighting or normalization happens downstream in scoring.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import NamedTuple

from ..data import Direction, validate_lang
from ..errors import EmptyInput, TraceInvariantError, TranslateUnsupported


@dataclass(frozen=True, slots=True)
class ScoreRequest:
    """Forced-decoding request: probability of output_text given input_text."""

    input_text: str
    input_lang: str
    output_text: str
    output_lang: str

    def __post_init__(self) -> None:
        validate_lang(self.input_lang)
        validate_lang(self.output_lang)
        if not self.input_text.strip():
            raise EmptyInput("input_text is empty")
        if not self.output_text.strip():
            raise EmptyInput("output_text is empty")


@dataclass(frozen=True, slots=True)
class TokenTrace:
    """Per-step forced-decoding record for one (input, output) pair.

    logprobs[t] is the log-probability of the forced target token at step t;
    entropies[t] is the Shannon entropy of the full step distribution.
    """

    tokens: tuple[str, ...]
    logprobs: tuple[float, ...]
    entropies: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    def validate(self, vocab_size: int | None = None) -> "TokenTrace":
        """Raise TraceInvariantError on any violated invariant; return self."""
        if not (len(self.tokens) == len(self.logprobs) == len(self.entropies)):
            raise TraceInvariantError(
                f"length mismatch: {len(self.tokens)} tokens, "
                f"{len(self.logprobs)} logprobs, {len(self.entropies)} entropies"
            )
        if len(self.tokens) < 1:
            raise TraceInvariantError("empty trace")
        for t, lp in enumerate(self.logprobs):
            if not math.isfinite(lp):
                raise TraceInvariantError(f"non-finite logprob at step {t}")
            if lp > 0.0:
                raise TraceInvariantError(f"logprob > 0 at step {t}")
        bound = math.log(vocab_size) if vocab_size is not None else None
        for t, h in enumerate(self.entropies):
            if not math.isfinite(h) or h < 0.0:
                raise TraceInvariantError(f"entropy out of range at step {t}")
            # Tiny float slack: H(uniform over v) may land an ulp above ln v.
            if bound is not None and h > bound + 1e-9:
                raise TraceInvariantError(f"entropy {h} exceeds ln(vocab) at step {t}")
        return self


class TraceKey(NamedTuple):
    """Identifies one scored cell: a scoring row and a generation direction."""

    example_id: str
    direction: Direction


class ProbabilityBackend(ABC):
    """Deterministic source of forced-decoding traces and translations."""

    name: str = "abstract"
    # Keyed stores (trace files) can score a cell without entity texts.
    requires_text: bool = True

    @abstractmethod
    def forced_score(self, req: ScoreRequest) -> TokenTrace:
        """Score output_text under teacher forcing given input_text."""

    def score_keyed(self, key: TraceKey, req: ScoreRequest | None) -> TokenTrace:
        """Score one pipeline cell; trace stores override this to look up by key."""
        if req is None:
            raise EmptyInput(f"no text available for {key.example_id}/{key.direction.key}")
        return self.forced_score(req)

    def translate(self, text: str, src_lang: str, tgt_lang: str) -> str:
        raise TranslateUnsupported(f"backend {self.name!r} cannot translate")

    @property
    def supports_translate(self) -> bool:
        return False

    def identity(self) -> dict:
        """Stable description for run manifests."""
        return {"kind": self.name}

    def close(self) -> None:
        """Release resources; default backends hold none."""
