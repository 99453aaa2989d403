"""Tokenizer shared by keyword discovery and TF-IDF ranking."""

from __future__ import annotations

import re
from typing import Iterable

# Pure function words only; applied identically to documents and queries.
STOPWORDS = frozenset(
    """a an and are as at be by for from has in is it its of on or that the
    this to was were will with which into than then""".split()
)

_SPLIT = re.compile(r"[^0-9a-z]+")


def tokenize(text: str, stopwords: Iterable[str] = STOPWORDS) -> list[str]:
    """Lowercase, split on non-alphanumerics, drop empties and stopwords.

    Non-ASCII letters count as separators.
    """
    stop = stopwords if isinstance(stopwords, (set, frozenset)) else frozenset(stopwords)
    return [t for t in _SPLIT.split(text.lower()) if t and t not in stop]


def normalize_terms(terms: str | Iterable[str], stopwords: Iterable[str] = STOPWORDS) -> list[str]:
    """Tokenize a keyword string or a list of keywords, keeping first-seen order, no repeats."""
    if isinstance(terms, str):
        terms = [terms]
    seen: dict[str, None] = {}
    for term in terms:
        for tok in tokenize(term, stopwords):
            seen.setdefault(tok)
    return list(seen)
