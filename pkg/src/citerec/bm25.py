"""Okapi BM25 over an in-memory inverted index."""

from __future__ import annotations

import heapq
import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import TrainingDocument
from .hybrid import RankedList

INDEX_FORMAT = "citerec-bm25-index"
INDEX_VERSION = 1

DEFAULT_K = 500


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if self.k1 < 0:
            raise ValueError("k1 must be >= 0")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must lie in [0, 1]")


@dataclass
class InvertedIndex:
    postings: dict[str, list[tuple[str, int]]]
    doc_lengths: dict[str, int]
    avg_doc_length: float
    doc_count: int
    doc_frequencies: dict[str, int]

    def idf(self, term: str) -> float:
        df = self.doc_frequencies.get(term, 0)
        return math.log((self.doc_count - df + 0.5) / (df + 0.5) + 1.0)

    def stats(self) -> dict:
        return {
            "doc_count": self.doc_count,
            "avg_doc_length": self.avg_doc_length,
            "terms": len(self.postings),
            "postings": sum(len(p) for p in self.postings.values()),
        }


def build_index(training_docs: Iterable[TrainingDocument]) -> InvertedIndex:
    """Index every token, markers included, so document lengths match the training text."""
    postings: dict[str, list[tuple[str, int]]] = {}
    doc_lengths: dict[str, int] = {}
    for doc in sorted(training_docs, key=lambda d: d.id):
        if doc.id in doc_lengths:
            raise ValueError(f"duplicate document id {doc.id!r}")
        doc_lengths[doc.id] = len(doc.tokens)
        for term, tf in sorted(Counter(doc.tokens).items()):
            postings.setdefault(term, []).append((doc.id, tf))
    if not doc_lengths:
        raise ValueError("cannot index an empty corpus")
    n = len(doc_lengths)
    avgdl = sum(doc_lengths.values()) / n
    if avgdl <= 0:
        raise ValueError("all documents are empty")
    return InvertedIndex(
        postings=dict(sorted(postings.items())),
        doc_lengths=doc_lengths,
        avg_doc_length=avgdl,
        doc_count=n,
        doc_frequencies={t: len(p) for t, p in sorted(postings.items())},
    )


def _term_weight(idf: float, tf: int, dl: int, avgdl: float, params: Bm25Params) -> float:
    norm = params.k1 * (1.0 - params.b + params.b * dl / avgdl)
    return idf * tf * (params.k1 + 1.0) / (tf + norm)


def score(index: InvertedIndex, params: Bm25Params, query_tokens: Sequence[str], doc_id: str) -> float:
    if doc_id not in index.doc_lengths:
        raise KeyError(f"unknown document id {doc_id!r}")
    dl = index.doc_lengths[doc_id]
    total = 0.0
    for term in query_tokens:
        for pid, tf in index.postings.get(term, ()):
            if pid == doc_id:
                total += _term_weight(index.idf(term), tf, dl, index.avg_doc_length, params)
                break
    return total


def score_all(index: InvertedIndex, params: Bm25Params, query_tokens: Sequence[str]) -> dict[str, float]:
    """Scores of every document sharing at least one term with the query."""
    acc: dict[str, float] = {}
    for term, qtf in Counter(query_tokens).items():
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for doc_id, tf in plist:
            w = _term_weight(idf, tf, index.doc_lengths[doc_id], index.avg_doc_length, params)
            acc[doc_id] = acc.get(doc_id, 0.0) + qtf * w
    return acc


def top_k(
    index: InvertedIndex,
    params: Bm25Params,
    query_tokens: Sequence[str],
    k: int = DEFAULT_K,
    source: str = "bm25",
) -> RankedList:
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = score_all(index, params, query_tokens)
    best = heapq.nsmallest(k, ((-s, d) for d, s in scores.items() if s > 0.0))
    return RankedList(source, [(d, -s) for s, d in best])


def save_index(index: InvertedIndex, path: str | Path) -> None:
    payload = {
        "format": INDEX_FORMAT,
        "version": INDEX_VERSION,
        "doc_count": index.doc_count,
        "avg_doc_length": index.avg_doc_length,
        "doc_lengths": index.doc_lengths,
        "postings": {t: [[d, tf] for d, tf in p] for t, p in index.postings.items()},
    }
    Path(path).write_text(json.dumps(payload, ensure_ascii=False, sort_keys=True), encoding="utf-8")


def load_index(path: str | Path) -> InvertedIndex:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != INDEX_FORMAT:
        raise ValueError(f"{path} is not a BM25 index file")
    if payload.get("version") != INDEX_VERSION:
        raise ValueError(f"unsupported index version {payload.get('version')}")
    postings = {t: [(d, int(tf)) for d, tf in p] for t, p in payload["postings"].items()}
    return InvertedIndex(
        postings=postings,
        doc_lengths={d: int(n) for d, n in payload["doc_lengths"].items()},
        avg_doc_length=float(payload["avg_doc_length"]),
        doc_count=int(payload["doc_count"]),
        doc_frequencies={t: len(p) for t, p in postings.items()},
    )
