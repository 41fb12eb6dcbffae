"""Trained models wrapped as rankers with a common ``(query_tokens, k) -> RankedList`` call."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import bm25, embed, lda
from .hybrid import FusionConfig, FusedList, RankedList, hybrid12, hybrid23


@dataclass
class Bm25Ranker:
    index: bm25.InvertedIndex
    params: bm25.Bm25Params = bm25.Bm25Params()
    source: str = "bm25"

    def __call__(self, query: Sequence[str], k: int) -> RankedList:
        return bm25.top_k(self.index, self.params, query, k, source=self.source)


@dataclass
class EmbeddingRanker:
    space: embed.EmbeddingSpace
    mode: str = embed.OUT
    source: str | None = None

    def __call__(self, query: Sequence[str], k: int) -> RankedList:
        qv = embed.infer_context_vector(self.space, query)
        if qv.all_oov:
            return RankedList(self.source or self.space.kind, [])
        return embed.score_hd2v(self.space, qv.vector, self.mode, k, source=self.source)


@dataclass
class LdaRanker:
    model: lda.LdaModel
    seed: int = 0
    source: str = "lda"

    def __call__(self, query: Sequence[str], k: int) -> RankedList:
        dist = lda.infer_topics(self.model, query, seed=self.seed)
        return lda.score_lda(self.model, dist.probabilities, k, source=self.source)


@dataclass
class Hybrid12Ranker:
    bm25: Bm25Ranker
    hd2vout: EmbeddingRanker
    config: FusionConfig = FusionConfig()

    def __call__(self, query: Sequence[str], k: int) -> FusedList:
        return hybrid12(query, self.bm25, self.hd2vout, self.config)


@dataclass
class Hybrid23Ranker:
    hd2vout_cited: EmbeddingRanker
    bm25_cited: Bm25Ranker
    bm25_citing: Bm25Ranker
    config: FusionConfig = FusionConfig()

    def __call__(self, query: Sequence[str], k: int) -> FusedList:
        return hybrid23(query, self.hd2vout_cited, self.bm25_cited, self.bm25_citing, self.config)


def ids_for(ranker):
    """Adapter for :func:`citerec.evaluation.run_evaluation`."""

    def recommend(query, depth):
        return ranker(query.context_tokens, depth).ids[:depth]

    return recommend
