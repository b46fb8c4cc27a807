"""Deterministic lexical toy backend.

The model is intentionally simple enough to recompute by hand:

- tokenization is lowercase whitespace splitting;
- for an ordered language pair, T(z|x) is the add-one-smoothed
  co-occurrence frequency of source token x with target token z over the
  aligned corpus rows (occurrence counts multiply within a row);
- the step distribution ignores the forced prefix (bag of words):
      P(z | X) = 0.5 * mean_x T(z|x)  +  0.5 / |V_tgt|
  where V_tgt is the corpus target vocabulary plus "<unk>" and x ranges
  over the input tokens (out-of-vocabulary tokens map to "<unk>");
- translation emits, per input token, the argmax of T(.|x), ties broken
  by lexicographically smallest target token; identity language pairs
  return the input unchanged.

Everything is precomputed at construction, so instances are immutable
and safe to share across threads.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter
from typing import Iterable, Mapping, Sequence

from ..errors import EmptyInput, UnsupportedLanguage
from ..fixtures import FIXTURE_CORPUS
from .base import ProbabilityBackend, ScoreRequest, TokenTrace

UNK = "<unk>"
LAMBDA = 0.5


def tokenize(text: str) -> list[str]:
    return text.lower().split()


class _PairTable:
    """Lexical table for one ordered (src_lang, tgt_lang) pair."""

    __slots__ = ("vocab", "src_vocab", "t_rows", "uniform")

    def __init__(self, pairs: Sequence[tuple[str, str]]):
        tgt_tokens: set[str] = set()
        src_tokens: set[str] = set()
        for src_sent, tgt_sent in pairs:
            src_tokens.update(tokenize(src_sent))
            tgt_tokens.update(tokenize(tgt_sent))
        self.vocab: tuple[str, ...] = tuple(sorted(tgt_tokens | {UNK}))
        self.src_vocab = frozenset(src_tokens)
        self.uniform = 1.0 / len(self.vocab)

        cooc: dict[str, Counter[str]] = {}
        for src_sent, tgt_sent in pairs:
            src_counts = Counter(tokenize(src_sent))
            tgt_counts = Counter(tokenize(tgt_sent))
            for x, cx in src_counts.items():
                row = cooc.setdefault(x, Counter())
                for z, cz in tgt_counts.items():
                    row[z] += cx * cz
        # t_rows[x][z] = (cooc + 1) / (sum_z cooc + |V|); missing x falls
        # back to the uniform row (add-one smoothing of zero counts).
        self.t_rows: dict[str, dict[str, float]] = {}
        v = len(self.vocab)
        for x, row in cooc.items():
            denom = sum(row.values()) + v
            self.t_rows[x] = {z: (row.get(z, 0) + 1) / denom for z in self.vocab}

    def t_row(self, x: str) -> Mapping[str, float]:
        if x not in self.src_vocab:
            x = UNK
        row = self.t_rows.get(x)
        if row is None:
            return {z: self.uniform for z in self.vocab}
        return row

    def step_distribution(self, input_tokens: Sequence[str]) -> dict[str, float]:
        rows = [self.t_row(x) for x in input_tokens]
        n = len(rows)
        mix = 1.0 - LAMBDA
        return {
            z: LAMBDA * sum(row[z] for row in rows) / n + mix * self.uniform
            for z in self.vocab
        }


class ToyBackend(ProbabilityBackend):
    """Lexical toy model over a small aligned corpus (default: built-in fixture)."""

    name = "toy"

    def __init__(
        self,
        corpus: Sequence[Mapping[str, str]] = FIXTURE_CORPUS,
        langs: Iterable[str] | None = None,
    ):
        self._corpus = tuple(dict(row) for row in corpus)
        if langs is None:
            found: set[str] = set()
            for row in self._corpus:
                found.update(row)
            self._langs = frozenset(found)
        else:
            self._langs = frozenset(langs)
        self._tables: dict[tuple[str, str], _PairTable] = {}
        for sl in sorted(self._langs):
            for tl in sorted(self._langs):
                pairs = [(row[sl], row[tl]) for row in self._corpus if sl in row and tl in row]
                self._tables[(sl, tl)] = _PairTable(pairs)

    def _table(self, src_lang: str, tgt_lang: str) -> _PairTable:
        try:
            return self._tables[(src_lang, tgt_lang)]
        except KeyError:
            bad = src_lang if src_lang not in self._langs else tgt_lang
            raise UnsupportedLanguage(f"toy backend does not know language {bad!r}") from None

    def vocab_size(self, tgt_lang: str) -> int:
        if tgt_lang not in self._langs:
            raise UnsupportedLanguage(f"toy backend does not know language {tgt_lang!r}")
        # V_tgt depends only on the target language; any source pairs with it.
        return len(self._tables[(tgt_lang, tgt_lang)].vocab)

    def step_distribution(self, input_text: str, input_lang: str, output_lang: str) -> dict[str, float]:
        """Full step distribution for inspection; identical at every step."""
        tokens = tokenize(input_text)
        if not tokens:
            raise EmptyInput("input_text is empty")
        return self._table(input_lang, output_lang).step_distribution(tokens)

    def forced_score(self, req: ScoreRequest) -> TokenTrace:
        table = self._table(req.input_lang, req.output_lang)
        dist = table.step_distribution(tokenize(req.input_text))
        # + 0.0 turns the -0.0 of a degenerate distribution into plain 0.0
        entropy = -sum(p * math.log(p) for p in dist.values()) + 0.0
        tokens = tokenize(req.output_text)
        logprobs = []
        for tok in tokens:
            lookup = tok if tok in dist else UNK
            logprobs.append(math.log(dist[lookup]))
        trace = TokenTrace(tuple(tokens), tuple(logprobs), tuple([entropy] * len(tokens)))
        return trace.validate(vocab_size=len(table.vocab))

    def translate(self, text: str, src_lang: str, tgt_lang: str) -> str:
        if src_lang not in self._langs or tgt_lang not in self._langs:
            bad = src_lang if src_lang not in self._langs else tgt_lang
            raise UnsupportedLanguage(f"toy backend does not know language {bad!r}")
        if src_lang == tgt_lang:
            return text
        table = self._table(src_lang, tgt_lang)
        out = []
        for tok in tokenize(text):
            row = table.t_row(tok)
            # highest probability wins; ties go to the lexicographically smallest token
            out.append(min(table.vocab, key=lambda z: (-row[z], z)))
        return " ".join(out)

    @property
    def supports_translate(self) -> bool:
        return True

    def identity(self) -> dict:
        digest = hashlib.sha256(
            json.dumps(self._corpus, sort_keys=True, ensure_ascii=False).encode("utf-8")
        ).hexdigest()
        return {"kind": "toy", "corpus_sha256": digest, "langs": sorted(self._langs)}
