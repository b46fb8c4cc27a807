"""Synthetic ranking datasets with known ground truth.

Every generated example is a ranked hypothesis pair whose two latent
qualities q are drawn uniformly from [0, 1). Each direction column of
the accompanying trace store carries

    value = -10 + signal * q + clip(Normal(0, noise), +-6)

and, for the designated outlier direction, the anti-correlated

    value = -10 - signal * q + clip(Normal(0, noise), +-6)

Traces are single-token, logprob = [value], entropy = [1.0], so a
uniform-weighted direction score recovers the column value exactly. The
-10 offset and the +-6 clip keep every logprob strictly negative for
any signal in [0, 3].

Randomness comes from a hand-rolled xoshiro256** generator seeded via
splitmix64, with uniform doubles taken as (x >> 11) * 2^-53 and normals
via the Box-Muller transform. The algorithm and constants are spelled
out below so the exact stream can be reproduced in any language.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .backends.base import TokenTrace, TraceKey
from .data import Direction, Entity, EntityKind, EvalExample, RelativeRanking
from .pipeline import DirectionSet, Mode

_MASK64 = (1 << 64) - 1

# splitmix64: state increment and the two finalizer multipliers.
_SM64_GAMMA = 0x9E3779B97F4A7C15
_SM64_MUL1 = 0xBF58476D1CE4E5B9
_SM64_MUL2 = 0x94D049BB133111EB

_OFFSET = -10.0
_NOISE_CLIP = 6.0


def _splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns (new_state, output)."""
    state = (state + _SM64_GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * _SM64_MUL1) & _MASK64
    z = ((z ^ (z >> 27)) * _SM64_MUL2) & _MASK64
    return state, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256StarStar:
    """xoshiro256** 1.0: output = rotl(s1 * 5, 7) * 9; shift 17, rotate 45."""

    def __init__(self, seed: int):
        state = seed & _MASK64
        s = []
        for _ in range(4):
            state, word = _splitmix64(state)
            s.append(word)
        self._s = s

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s[1] << 17) & _MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform(self) -> float:
        """Uniform double in [0, 1): the top 53 bits over 2^53."""
        return (self.next_u64() >> 11) * 2.0**-53

    def gauss(self) -> float:
        """Standard normal via Box-Muller; u1 is shifted into (0, 1]."""
        u1 = ((self.next_u64() >> 11) + 1) * 2.0**-53
        u2 = (self.next_u64() >> 11) * 2.0**-53
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


@dataclass(frozen=True, slots=True)
class SynthResult:
    examples: tuple[EvalExample, ...]
    traces: dict[TraceKey, TokenTrace]
    qualities: dict[str, float]  # row id -> latent quality, for direct checks


def synth_generate(
    n: int,
    noise: float,
    outlier_direction: Direction | None = None,
    seed: int = 0,
    signal: float = 1.0,
    mode: Mode = Mode.MT8,
) -> SynthResult:
    """n ranked pairs plus a trace store over the mode's directions."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= noise <= 1.0:
        raise ValueError("noise must be in [0, 1]")
    if not 0.0 <= signal <= 3.0:
        raise ValueError("signal must be in [0, 3] to keep logprobs negative")
    directions = DirectionSet.full(mode).directions
    if outlier_direction is not None and outlier_direction not in directions:
        raise ValueError(f"outlier direction {outlier_direction.key!r} not in mode {mode.value}")
    rng = Xoshiro256StarStar(seed)
    width = len(str(n))
    examples: list[EvalExample] = []
    traces: dict[TraceKey, TokenTrace] = {}
    qualities: dict[str, float] = {}
    for i in range(1, n + 1):
        ex_id = f"syn{i:0{width}d}"
        q_a, q_b = rng.uniform(), rng.uniform()
        while q_a == q_b:  # ties would make the ranking meaningless
            q_b = rng.uniform()
        q_better, q_worse = max(q_a, q_b), min(q_a, q_b)
        better = Entity(EntityKind.HYPO, f"synthetic hypothesis {i} strong", "en")
        worse = Entity(EntityKind.HYPO, f"synthetic hypothesis {i} weak", "en")
        examples.append(
            EvalExample(
                id=ex_id,
                src=Entity(EntityKind.SRC, f"synthetic source {i}", "de"),
                ref=Entity(EntityKind.REF, f"synthetic reference {i}", "en"),
                hyp=better,
                trans1=Entity(EntityKind.TRANS1, f"synthetic trans1 {i}", "en"),
                trans2=Entity(EntityKind.TRANS2, f"synthetic trans2 {i}", "es"),
                human=RelativeRanking(better, worse),
            )
        )
        for suffix, q in (("better", q_better), ("worse", q_worse)):
            row_id = f"{ex_id}#{suffix}"
            qualities[row_id] = q
            for d in directions:
                draw = noise * rng.gauss()
                draw = max(-_NOISE_CLIP, min(_NOISE_CLIP, draw))
                sign = -1.0 if d == outlier_direction else 1.0
                value = _OFFSET + sign * signal * q + draw
                traces[TraceKey(row_id, d)] = TokenTrace(("w",), (value,), (1.0,))
    return SynthResult(tuple(examples), traces, qualities)
