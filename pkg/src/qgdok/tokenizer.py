"""Deterministic whitespace tokenizer used for chunking and n-gram metrics.

Rules: split on whitespace, lowercase, strip leading/trailing punctuation
from each word, drop words that become empty. Math symbols (+, =, ^, /, <,
>, -) are not treated as punctuation so expressions like "x^2" and bare
operators survive intact.
"""

from __future__ import annotations

from typing import NamedTuple

# Edge characters stripped from both ends of each whitespace-delimited word.
# Deliberately excludes operator characters so standalone "+" or "=" tokens
# and inner expressions like "x^2" are preserved.
_EDGE_PUNCT = set(".,;:!?\"'()[]{}`“”‘’…")


class TokenSpan(NamedTuple):
    """A token plus the character span it occupies in the raw text."""

    token: str
    start: int
    end: int


def tokenize_with_spans(text: str) -> list[TokenSpan]:
    """Tokenize, keeping the [start, end) character offsets of each token.

    Offsets point at the stripped word in the original (uncased) text, so a
    chunk's text can be reconstructed from the raw body without losing
    punctuation or casing between tokens.
    """
    spans: list[TokenSpan] = []
    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace():
            j += 1
        start, end = i, j
        while start < end and text[start] in _EDGE_PUNCT:
            start += 1
        while end > start and text[end - 1] in _EDGE_PUNCT:
            end -= 1
        if end > start:
            spans.append(TokenSpan(text[start:end].lower(), start, end))
        i = j
    return spans


def tokenize(text: str) -> list[str]:
    """Return the normalized token sequence for `text`."""
    return [s.token for s in tokenize_with_spans(text)]
