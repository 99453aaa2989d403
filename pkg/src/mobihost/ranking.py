"""TF-IDF post-filtering of keyword-search results.

Each discovered service becomes one document (class name, class description
and the WSDL text of its spec).  Weights are raw term frequency times
``ln(N / df)``; documents are ranked by cosine similarity with the query
vector, and those scoring at least ``ams_threshold`` form the Advanced
Matching Services (AMS) list.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

from .errors import EmptyQuery, EmptyResults, UnknownDocument
from .text import STOPWORDS, tokenize

if TYPE_CHECKING:
    from .discovery import MatchRecord, Query

DEFAULT_AMS_THRESHOLD = 0.25


@dataclass(frozen=True)
class DocumentCorpus:
    docs: Mapping[str, tuple[str, ...]]
    vocabulary: tuple[str, ...]
    df: Mapping[str, int]
    stopwords: frozenset[str] = STOPWORDS

    @classmethod
    def from_texts(cls, texts: Mapping[str, str], stopwords: Iterable[str] = STOPWORDS) -> "DocumentCorpus":
        if not texts:
            raise EmptyResults("cannot build a corpus from zero documents")
        stop = frozenset(stopwords)
        docs = {doc_id: tuple(tokenize(text, stop)) for doc_id, text in texts.items()}
        df: Counter = Counter()
        for tokens in docs.values():
            df.update(set(tokens))
        return cls(docs, tuple(sorted(df)), dict(df), stop)

    @property
    def size(self) -> int:
        return len(self.docs)

    @property
    def k(self) -> int:
        return len(self.vocabulary)

    def idf(self, term: str) -> float:
        df = self.df.get(term, 0)
        return math.log(self.size / df) if df else 0.0

    def weights(self, doc_id: str) -> dict[str, float]:
        try:
            counts = Counter(self.docs[doc_id])
        except KeyError:
            raise UnknownDocument(f"no document {doc_id!r} in corpus") from None
        return {term: n * self.idf(term) for term, n in counts.items()}

    def query_weights(self, tokens: Sequence[str]) -> dict[str, float]:
        return {term: n * self.idf(term) for term, n in Counter(tokens).items() if term in self.df}


@dataclass(frozen=True)
class AmsEntry:
    class_id: str
    score: float
    rank: int


def document_text(record: "MatchRecord") -> str:
    body = record.adv.body
    parts = [body.name, body.description]
    if record.spec is not None:
        parts.append(record.spec.body.wsdl.search_text())
    return " ".join(parts)


def build_corpus(results: Sequence["MatchRecord"], stopwords: Iterable[str] = STOPWORDS) -> DocumentCorpus:
    """One document per distinct class_id; the first record for a class wins."""
    texts: dict[str, str] = {}
    for rec in results:
        texts.setdefault(rec.class_id, document_text(rec))
    return DocumentCorpus.from_texts(texts, stopwords)


def tfidf_weight(corpus: DocumentCorpus, doc_id: str, term: str) -> float:
    return corpus.weights(doc_id).get(term, 0.0)


def _cosine(q: Mapping[str, float], d: Mapping[str, float]) -> float:
    qn = math.sqrt(sum(w * w for w in q.values()))
    dn = math.sqrt(sum(w * w for w in d.values()))
    if qn == 0.0 or dn == 0.0:
        return 0.0
    dot = sum(w * d.get(t, 0.0) for t, w in q.items())
    # rounding can push parallel vectors a hair past 1
    return min(1.0, max(0.0, dot / (qn * dn)))


def score_documents(corpus: DocumentCorpus, query_terms: Sequence[str] | str) -> dict[str, float]:
    if isinstance(query_terms, str):
        query_terms = [query_terms]
    tokens = [tok for term in query_terms for tok in tokenize(term, corpus.stopwords)]
    if not tokens:
        raise EmptyQuery("query has no terms after tokenization")
    q = corpus.query_weights(tokens)
    return {doc_id: _cosine(q, corpus.weights(doc_id)) for doc_id in corpus.docs}


def cosine_rank(
    corpus: DocumentCorpus,
    query_terms: Sequence[str] | str,
    ams_threshold: float = DEFAULT_AMS_THRESHOLD,
) -> list[AmsEntry]:
    scores = score_documents(corpus, query_terms)
    kept = sorted(
        ((doc_id, s) for doc_id, s in scores.items() if s >= ams_threshold),
        key=lambda item: (-item[1], item[0]),
    )
    return [AmsEntry(doc_id, s, i) for i, (doc_id, s) in enumerate(kept, start=1)]


def filter_to_ams(
    results: Sequence["MatchRecord"],
    query: "Query | Sequence[str]",
    ams_threshold: float = DEFAULT_AMS_THRESHOLD,
) -> tuple[list[AmsEntry], list["MatchRecord"]]:
    if isinstance(query, str):
        terms = [query]
    else:
        terms = list(getattr(query, "keywords", query))
    ams = cosine_rank(build_corpus(results), terms, ams_threshold)
    keep = {e.class_id for e in ams}
    return ams, [r for r in results if r.class_id in keep]
