"""Built-in desk-scale fixtures: a tiny parallel corpus and an evaluation set.

The corpus is 8 aligned sentence rows in French/English/Spanish; the toy
backend derives its lexical tables from it, so every score over these
fixtures can be recomputed by hand. The evaluation set reuses the corpus
sentences as source/reference and pairs them with hand-written hypotheses
of varying quality plus direct-assessment scores.
"""

from __future__ import annotations

from .data import DirectAssessment, Entity, EntityKind, EvalExample

# Rows are aligned translations of one another; all text is lowercase
# because the toy tokenizer lowercases anyway.
FIXTURE_CORPUS: tuple[dict[str, str], ...] = (
    {"fr": "le chat dort", "en": "the cat sleeps", "es": "el gato duerme"},
    {"fr": "le chien mange", "en": "the dog eats", "es": "el perro come"},
    {"fr": "la maison est grande", "en": "the house is big", "es": "la casa es grande"},
    {"fr": "je vois le chat", "en": "i see the cat", "es": "veo el gato"},
    {"fr": "le soleil brille", "en": "the sun shines", "es": "el sol brilla"},
    {"fr": "nous aimons le pain", "en": "we love bread", "es": "amamos el pan"},
    {"fr": "elle lit un livre", "en": "she reads a book", "es": "ella lee un libro"},
    {"fr": "l'eau est froide", "en": "the water is cold", "es": "el agua esta fria"},
)

# (hypothesis, human direct-assessment score) per corpus row.
_FIXTURE_HYPS: tuple[tuple[str, float], ...] = (
    ("the cat sleeps", 0.95),
    ("the dog eats bread", 0.75),
    ("the house is very big", 0.80),
    ("i see a dog", 0.40),
    ("the sun is cold", 0.30),
    ("we love the bread", 0.85),
    ("the book reads", 0.20),
    ("water cold", 0.50),
)


def fixture_dataset() -> list[EvalExample]:
    """The frozen 8-example fr->en evaluation set used across tests."""
    examples = []
    for i, (row, (hyp, score)) in enumerate(zip(FIXTURE_CORPUS, _FIXTURE_HYPS), start=1):
        examples.append(
            EvalExample(
                id=f"fx{i}",
                src=Entity(EntityKind.SRC, row["fr"], "fr"),
                ref=Entity(EntityKind.REF, row["en"], "en"),
                hyp=Entity(EntityKind.HYPO, hyp, "en"),
                human=DirectAssessment(score),
            )
        )
    return examples
