"""Per-direction scores: weighted means of forced-decoding token log-probs.

A direction score is sum(w_t * logprob_t) where the term weights w_t are
either uniform or proportional to the per-step entropies of the trace.
Weights are normalized to sum to 1 by default so that sequences of
different lengths stay commensurable; raw (unnormalized) weighting is
available for the plain-sum variant.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .backends.base import TokenTrace
from .data import Direction

_NORM_TOL = 1e-9


class WeightScheme(enum.Enum):
    UNIFORM = "uniform"
    ENTROPY = "entropy"


@dataclass(frozen=True, slots=True)
class TermWeights:
    """Non-negative per-step weights; normalized ones sum to 1."""

    weights: tuple[float, ...]
    scheme: WeightScheme

    def __post_init__(self) -> None:
        if not self.weights:
            raise ValueError("weights must be non-empty")
        for w in self.weights:
            if not math.isfinite(w) or w < 0.0:
                raise ValueError(f"weight out of range: {w!r}")

    def __len__(self) -> int:
        return len(self.weights)


@dataclass(frozen=True, slots=True)
class DirectionScore:
    example_id: str
    direction: Direction
    value: float


def term_weights(
    trace: TokenTrace, scheme: WeightScheme, normalize: bool = True
) -> TermWeights:
    """Weights for each generation step of `trace` under `scheme`.

    Entropy scheme: raw weight at step t is the trace's entropy at t. If
    every entropy is zero the distribution carries no step-level signal,
    so the scheme falls back to uniform (this also avoids 0/0 when
    normalizing).
    """
    m = len(trace)
    if m == 0:
        raise ValueError("empty trace")
    if scheme is WeightScheme.ENTROPY:
        raw = trace.entropies
        if all(h == 0.0 for h in raw):
            raw = (1.0,) * m
    else:
        raw = (1.0,) * m
    if not normalize:
        return TermWeights(tuple(raw), scheme)
    total = sum(raw)
    return TermWeights(tuple(w / total for w in raw), scheme)


def direction_score(trace: TokenTrace, weights: TermWeights) -> float:
    """Dot product of the trace's logprobs with the term weights."""
    if len(weights) != len(trace):
        raise ValueError(
            f"weights length {len(weights)} does not match trace length {len(trace)}"
        )
    return sum(w * lp for w, lp in zip(weights.weights, trace.logprobs))


def score_trace(trace: TokenTrace, scheme: WeightScheme, normalize: bool = True) -> float:
    """Convenience: term_weights + direction_score in one call."""
    return direction_score(trace, term_weights(trace, scheme, normalize))
