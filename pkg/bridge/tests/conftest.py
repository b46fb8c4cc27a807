"""Shared fixtures: a tiny but fully functional checkpoint.

The checkpoint is built from scratch each session: a sentencepiece BPE
model trained on a small mixed-language corpus, the matching vocab
table, and randomly initialized (but seed-fixed) weights in the served
model family's architecture. Everything downstream of it is therefore
deterministic across runs without any network access.
"""

from __future__ import annotations

import json
import shutil

import pytest
import torch

from datscore_bridge.model import BridgeModel

TINY_CORPUS = [
    "the cat sat on the mat",
    "a dog ran across the green field",
    "the sun rises over the quiet river",
    "she reads an old book by the window",
    "les chats dorment sur le tapis rouge",
    "le soleil brille sur la riviere calme",
    "un chien court dans le jardin",
    "elle lit un livre pres de la fenetre",
    "el gato duerme sobre la alfombra",
    "el perro corre por el campo verde",
    "der hund lauft durch den garten",
    "die sonne scheint uber dem fluss",
    "the morning train was late again",
    "rain fell softly on the tin roof",
    "bread and cheese make a simple meal",
    "the children play near the harbor",
    "la lune monte sur les collines",
    "el viento mueve las hojas secas",
    "das kind singt ein altes lied",
    "a small boat drifts along the shore",
]

NUM_LANG_TOKENS = 100
NUM_MADEUP = 8


def build_tiny_checkpoint(outdir) -> str:
    import sentencepiece as spm
    from transformers import M2M100Config, M2M100ForConditionalGeneration, M2M100Tokenizer

    outdir.mkdir(parents=True, exist_ok=True)
    spm_path = outdir / "sentencepiece.bpe.model"
    with open(spm_path, "wb") as writer:
        spm.SentencePieceTrainer.train(
            sentence_iterator=iter(TINY_CORPUS),
            model_writer=writer,
            vocab_size=180,
            model_type="bpe",
            character_coverage=1.0,
            hard_vocab_limit=False,
        )
    sp = spm.SentencePieceProcessor()
    sp.load(str(spm_path))
    vocab = {"<s>": 0, "<pad>": 1, "</s>": 2, "<unk>": 3}
    for i in range(sp.get_piece_size()):
        piece = sp.id_to_piece(i)
        if piece not in vocab:
            vocab[piece] = len(vocab)
    with open(outdir / "vocab.json", "w", encoding="utf-8") as fh:
        json.dump(vocab, fh, ensure_ascii=False)
    tokenizer = M2M100Tokenizer(
        vocab_file=str(outdir / "vocab.json"),
        spm_file=str(spm_path),
        language_codes="m2m100",
        num_madeup_words=NUM_MADEUP,
    )
    tokenizer.save_pretrained(str(outdir))
    torch.manual_seed(0)
    config = M2M100Config(
        vocab_size=len(vocab) + NUM_LANG_TOKENS + NUM_MADEUP,
        d_model=32,
        encoder_layers=2,
        decoder_layers=2,
        encoder_attention_heads=2,
        decoder_attention_heads=2,
        encoder_ffn_dim=64,
        decoder_ffn_dim=64,
        max_position_embeddings=512,
        pad_token_id=1,
        bos_token_id=0,
        eos_token_id=2,
        decoder_start_token_id=2,
    )
    M2M100ForConditionalGeneration(config).eval().save_pretrained(str(outdir))
    return str(outdir)


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory) -> str:
    return build_tiny_checkpoint(tmp_path_factory.mktemp("ckpt") / "tiny")


@pytest.fixture(scope="session")
def model(checkpoint) -> BridgeModel:
    return BridgeModel(checkpoint, device="cpu")
