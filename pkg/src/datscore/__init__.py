"""Forced-decoding MT evaluation with data augmentation.

A hypothesis is scored by forced decoding in up to eight directions
between {source, reference, two pivot translations} and the hypothesis.
Token log-probabilities are combined with entropy-based term weights,
directions are combined with one-vs-rest correlation weights, and the
resulting segment scores are meta-evaluated against human judgments.
"""

from __future__ import annotations

__version__ = "0.1.0"
