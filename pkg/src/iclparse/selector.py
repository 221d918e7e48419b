"""BM25 retrieval of labeled demonstrations for a query log."""

from __future__ import annotations

import heapq
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Sequence

from .core import LogRecord, Template, TokenizedLog, tokenize


class EmptyCorpus(ValueError):
    pass


class BadDocId(IndexError):
    pass


@dataclass(frozen=True)
class Candidate:
    record: LogRecord
    template: Template
    tokens: TokenizedLog
    term_freqs: Counter


class Bm25Index:
    def __init__(self, candidates: Sequence[tuple[LogRecord, Template]], k1: float = 1.2, b: float = 0.75) -> None:
        if not candidates:
            raise EmptyCorpus("cannot index an empty candidate set")
        if k1 <= 0:
            raise ValueError(f"k1 must be positive, got {k1}")
        if not 0 <= b <= 1:
            raise ValueError(f"b must be in [0, 1], got {b}")
        self.k1 = k1
        self.b = b
        self.corpus: list[Candidate] = []
        self.doc_freq: Counter = Counter()
        self.postings: dict[str, list[int]] = defaultdict(list)
        for doc_id, (record, template) in enumerate(candidates):
            toks = tokenize(record.content)
            tf = Counter(toks.tokens)
            self.corpus.append(Candidate(record, template, toks, tf))
            for token in tf:
                self.doc_freq[token] += 1
                self.postings[token].append(doc_id)
        self.n_docs = len(self.corpus)
        self.avg_len = math.fsum(c.tokens.token_count for c in self.corpus) / self.n_docs

    def idf(self, token: str) -> float:
        f = self.doc_freq.get(token, 0)
        return math.log((self.n_docs - f + 0.5) / (f + 0.5) + 1)

    def _term(self, idf: float, tf: int, doc_len: int) -> float:
        norm = 1 - self.b + self.b * doc_len / self.avg_len if self.avg_len > 0 else 1.0
        return idf * tf * (self.k1 + 1) / (tf + self.k1 * norm)

    def score(self, query: TokenizedLog, doc_id: int) -> float:
        if not 0 <= doc_id < self.n_docs:
            raise BadDocId(f"doc_id {doc_id} outside [0, {self.n_docs})")
        doc = self.corpus[doc_id]
        total = 0.0
        for token in dict.fromkeys(query.tokens):
            tf = doc.term_freqs.get(token, 0)
            if tf:
                total += self._term(self.idf(token), tf, doc.tokens.token_count)
        return total

    def scores(self, query: TokenizedLog) -> list[float]:
        """Score every document; only postings of the query tokens are visited."""
        out = [0.0] * self.n_docs
        for token in dict.fromkeys(query.tokens):
            docs = self.postings.get(token)
            if not docs:
                continue
            idf = self.idf(token)
            for doc_id in docs:
                doc = self.corpus[doc_id]
                out[doc_id] += self._term(idf, doc.term_freqs[token], doc.tokens.token_count)
        return out

    def top_k(
        self, query: TokenizedLog, k: int, ascending: bool = True
    ) -> list[tuple[LogRecord, Template, float]]:
        """Return the ``k`` best candidates, ties resolved toward smaller line_id.

        By default the list runs from least to most similar so the closest
        example ends up next to the query in the prompt; ``ascending=False``
        flips it.
        """
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        scored = self.scores(query)
        best = heapq.nsmallest(
            k, range(self.n_docs), key=lambda i: (-scored[i], self.corpus[i].record.line_id, i)
        )
        if ascending:
            best.sort(key=lambda i: (scored[i], self.corpus[i].record.line_id, i))
        else:
            best.sort(key=lambda i: (-scored[i], self.corpus[i].record.line_id, i))
        return [(self.corpus[i].record, self.corpus[i].template, scored[i]) for i in best]


def build_index(candidates: Sequence[tuple[LogRecord, Template]], k1: float = 1.2, b: float = 0.75) -> Bm25Index:
    return Bm25Index(candidates, k1=k1, b=b)
