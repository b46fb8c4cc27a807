"""Forced scoring and greedy translation over an M2M100-family checkpoint.

Prompt layout is the one this model family was trained with: the
encoder consumes [source-language token, source pieces..., eos] and the
decoder sequence is [eos, target-language token, output pieces..., eos].
A score trace reports exactly the sentencepiece pieces of the output
text, so its arrays are as long as the tokenizer's piece count for that
text; the language token and the final eos are part of the forced
sequence but are not reported as steps.

All log-probabilities and entropies are in nats. Each step's entropy is
computed from the full-vocabulary softmax in float64, and every trace
is checked against the trace invariants (equal lengths, logprob <= 0,
entropy within [0, ln v]) before it leaves this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import torch
from transformers import M2M100ForConditionalGeneration, M2M100Tokenizer

from .errors import BridgeError, RequestError

# Entropy may land a float ulp above ln(v) for near-uniform steps.
_ENTROPY_SLACK = 1e-9


@dataclass(frozen=True, slots=True)
class ScoreItem:
    """Forced-decoding request: probability of output_text given input_text."""

    input_text: str
    input_lang: str
    output_text: str
    output_lang: str


@dataclass(frozen=True, slots=True)
class Trace:
    """Per-step forced-decoding record; mirrors the wire response shape."""

    tokens: tuple[str, ...]
    logprobs: tuple[float, ...]
    entropies: tuple[float, ...]

    def payload(self) -> dict:
        return {
            "tokens": list(self.tokens),
            "logprobs": list(self.logprobs),
            "entropies": list(self.entropies),
        }


class BridgeModel:
    """One loaded checkpoint, exposed as batched scoring plus translation.

    Not thread-safe by design: the service funnels all work through a
    single worker. `scored_items` / `translated_texts` count completed
    work, which lets callers verify that cached or resumed runs issue
    zero model calls.
    """

    def __init__(self, model: str, device: str = "cpu"):
        self.tokenizer = M2M100Tokenizer.from_pretrained(model)
        self.model = M2M100ForConditionalGeneration.from_pretrained(model).to(device).eval()
        cfg = self.model.config
        if not getattr(cfg, "is_encoder_decoder", False) or cfg.decoder_start_token_id is None:
            raise BridgeError("checkpoint does not support forced scoring with per-step distributions")
        self.device = device
        self.vocab_size = int(cfg.vocab_size)
        self.entropy_bound = math.log(self.vocab_size)
        self.scored_items = 0
        self.translated_texts = 0
        self._banned = self._generation_ban_list()

    # -- request validation ---------------------------------------------------

    def supports_lang(self, code: str) -> bool:
        return code in self.tokenizer.lang_code_to_token

    def require_lang(self, code: str, field: str) -> None:
        if not self.supports_lang(code):
            raise RequestError(f"unsupported language code {code!r} in {field!r}")

    def validate_score_item(self, item: ScoreItem) -> None:
        self.require_lang(item.input_lang, "input_lang")
        self.require_lang(item.output_lang, "output_lang")
        if not item.input_text.strip():
            raise RequestError("input_text is empty")
        if not item.output_text.strip():
            raise RequestError("output_text is empty")

    # -- forced scoring -------------------------------------------------------

    def score_batch(self, items: Sequence[ScoreItem]) -> list[Trace]:
        """Teacher-force every item in one padded forward pass."""
        if not items:
            return []
        for item in items:
            self.validate_score_item(item)
        tok = self.tokenizer
        pad = tok.pad_token_id
        start = self.model.config.decoder_start_token_id
        srcs, decs, outs, pieces = [], [], [], []
        for item in items:
            out_pieces = tok.tokenize(item.output_text)
            if not out_pieces:
                raise RequestError("output_text is empty after tokenization")
            out_ids = tok.convert_tokens_to_ids(out_pieces)
            srcs.append(self._encode_source(item.input_text, item.input_lang))
            # Shift-right of [tgt_lang, pieces..., eos]; the trailing eos
            # prediction is computed but not reported.
            decs.append([start, tok.get_lang_id(item.output_lang)] + out_ids)
            outs.append(out_ids)
            pieces.append(out_pieces)
        src_len = max(len(s) for s in srcs)
        dec_len = max(len(d) for d in decs)
        input_ids = torch.tensor([s + [pad] * (src_len - len(s)) for s in srcs], device=self.device)
        attention = torch.tensor([[1] * len(s) + [0] * (src_len - len(s)) for s in srcs], device=self.device)
        decoder_ids = torch.tensor([d + [pad] * (dec_len - len(d)) for d in decs], device=self.device)
        with torch.no_grad():
            logits = self.model(
                input_ids=input_ids, attention_mask=attention, decoder_input_ids=decoder_ids
            ).logits
        traces = []
        for i, out_ids in enumerate(outs):
            m = len(out_ids)
            # Positions 1..m predict the output pieces (position 0 predicts
            # the target-language token).
            logp = torch.log_softmax(logits[i, 1 : m + 1, :].double(), dim=-1)
            steps = torch.arange(m, device=logp.device)
            lps = logp[steps, torch.tensor(out_ids, device=logp.device)]
            ents = -(logp.exp() * logp).sum(dim=-1)
            trace = Trace(
                tokens=tuple(pieces[i]),
                logprobs=tuple(float(x) for x in lps),
                entropies=tuple(float(x) + 0.0 for x in ents),
            )
            self.assert_trace_invariants(trace)
            traces.append(trace)
        self.scored_items += len(items)
        return traces

    def assert_trace_invariants(self, trace: Trace) -> None:
        """Refuse to emit a trace that violates the contract."""
        if not (len(trace.tokens) == len(trace.logprobs) == len(trace.entropies) > 0):
            raise BridgeError("trace invariant violated: array lengths disagree or trace is empty")
        for t, lp in enumerate(trace.logprobs):
            if not math.isfinite(lp) or lp > 0.0:
                raise BridgeError(f"trace invariant violated: logprob {lp} at step {t}")
        for t, h in enumerate(trace.entropies):
            if not math.isfinite(h) or h < 0.0 or h > self.entropy_bound + _ENTROPY_SLACK:
                raise BridgeError(f"trace invariant violated: entropy {h} at step {t}")

    # -- translation ----------------------------------------------------------

    def translate(self, text: str, src_lang: str, tgt_lang: str, max_new_tokens: int = 128) -> str:
        """Greedy decode; deterministic for a fixed checkpoint and input."""
        self.require_lang(src_lang, "src_lang")
        self.require_lang(tgt_lang, "tgt_lang")
        if not text.strip():
            raise RequestError("text is empty")
        tok = self.tokenizer
        src = torch.tensor([self._encode_source(text, src_lang)], device=self.device)
        attention = torch.ones_like(src)
        eos = tok.eos_token_id
        generated: list[int] = []
        with torch.no_grad():
            encoder_out = self.model.get_encoder()(input_ids=src, attention_mask=attention)
            step_ids = torch.tensor(
                [[self.model.config.decoder_start_token_id, tok.get_lang_id(tgt_lang)]], device=self.device
            )
            past = None
            for _ in range(max_new_tokens):
                out = self.model(
                    encoder_outputs=encoder_out,
                    attention_mask=attention,
                    decoder_input_ids=step_ids,
                    past_key_values=past,
                    use_cache=True,
                )
                past = out.past_key_values
                logits = out.logits[0, -1, :].clone()
                logits[self._banned] = float("-inf")
                if not generated:
                    # At least one content token, so a translation is never empty.
                    logits[eos] = float("-inf")
                nxt = int(logits.argmax())
                if nxt == eos:
                    break
                generated.append(nxt)
                step_ids = torch.tensor([[nxt]], device=self.device)
        translation = tok.convert_tokens_to_string(tok.convert_ids_to_tokens(generated)).strip()
        if not translation:
            raise BridgeError("greedy decoding produced no visible text")
        self.translated_texts += 1
        return translation

    # -- internals ------------------------------------------------------------

    def _encode_source(self, text: str, lang: str) -> list[int]:
        tok = self.tokenizer
        ids = tok.convert_tokens_to_ids(tok.tokenize(text))
        if not ids:
            raise RequestError("text is empty after tokenization")
        return [tok.get_lang_id(lang)] + ids + [tok.eos_token_id]

    def _generation_ban_list(self) -> torch.Tensor:
        """Ids greedy search must never emit: non-text specials, language
        tokens, vocabulary padding slots, and pieces with no visible glyphs."""
        tok = self.tokenizer
        banned = {tok.pad_token_id, tok.bos_token_id, tok.unk_token_id}
        banned.update(range(len(tok.encoder), self.vocab_size))
        for piece, idx in tok.encoder.items():
            if not piece.replace("▁", "").strip():
                banned.add(idx)
        banned.discard(tok.eos_token_id)
        return torch.tensor(sorted(banned), device=self.device)
