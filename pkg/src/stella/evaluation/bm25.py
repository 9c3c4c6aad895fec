"""Okapi BM25 over an in-memory inverted index.

Scoring uses the non-negative IDF variant, ln(1 + (N - df + 0.5)/(df + 0.5)),
so tiny corpora cannot produce negative scores.  The analyzer lowercases and
detaches punctuation; pure punctuation tokens carry no signal and are
dropped.
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Iterable

from ..errors import UnknownPassage
from ..tokenization import analyzer_terms


class Bm25Index:
    def __init__(self, k1: float = 1.2, b: float = 0.75):
        self.k1 = k1
        self.b = b
        self.postings: dict[str, dict[str, int]] = {}   # term -> passage_id -> tf
        self.doc_lengths: dict[str, int] = {}
        self.avgdl = 0.0

    @property
    def N(self) -> int:
        return len(self.doc_lengths)

    @classmethod
    def build(cls, corpus: Iterable[tuple[str, str]], k1: float = 1.2, b: float = 0.75) -> "Bm25Index":
        """corpus: iterable of (passage_id, text)."""
        index = cls(k1=k1, b=b)
        total = 0
        for passage_id, text in corpus:
            terms = analyzer_terms(text)
            index.doc_lengths[passage_id] = len(terms)
            total += len(terms)
            for term, tf in Counter(terms).items():
                index.postings.setdefault(term, {})[passage_id] = tf
        index.avgdl = total / index.N if index.N else 0.0
        return index

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, {}))
        return math.log(1.0 + (self.N - df + 0.5) / (df + 0.5))

    def score(self, query_terms: list[str], passage_id: str) -> float:
        if passage_id not in self.doc_lengths:
            raise UnknownPassage(passage_id)
        dl = self.doc_lengths[passage_id]
        norm = self.k1 * (1.0 - self.b + self.b * dl / self.avgdl)
        total = 0.0
        for term in query_terms:
            tf = self.postings.get(term, {}).get(passage_id, 0)
            if tf == 0:
                continue
            total += self.idf(term) * tf * (self.k1 + 1.0) / (tf + norm)
        return total

    def search(self, query_text: str, cutoff: int = 10) -> list[tuple[str, float]]:
        """Top-`cutoff` positive-score passages; ties break by passage_id."""
        query_terms = analyzer_terms(query_text)
        scores: dict[str, float] = {}
        for term in set(query_terms):
            postings = self.postings.get(term)
            if not postings:
                continue
            idf = self.idf(term)
            tf_weight = query_terms.count(term)
            for passage_id, tf in postings.items():
                dl = self.doc_lengths[passage_id]
                norm = self.k1 * (1.0 - self.b + self.b * dl / self.avgdl)
                contribution = idf * tf * (self.k1 + 1.0) / (tf + norm)
                scores[passage_id] = scores.get(passage_id, 0.0) + tf_weight * contribution
        ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
        return ranked[:cutoff]


def bm25_score(index: Bm25Index, query_tokens: list[str], passage_id: str) -> float:
    """Okapi score of one passage for pre-analyzed query tokens."""
    return index.score(query_tokens, passage_id)
