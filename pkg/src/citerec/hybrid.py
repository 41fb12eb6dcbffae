"""Semi-genetic stochastic fusion of ranked lists.

Every component contributes its top-k list.  Each entry's fitness is its
reciprocal rank; a paper appearing in several lists has its fitness
values summed, and the sums are normalized into a sampling distribution.
``n`` draws with replacement are taken from that distribution and papers
are reordered by how often they were drawn.  There is a single
generation and no cross-over or mutation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

DEFAULT_K = 500
DEFAULT_DRAWS = 1_000_000


@dataclass
class RankedList:
    source: str
    entries: list[tuple[str, float]] = field(default_factory=list)

    def __post_init__(self):
        ids = [d for d, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate ids in ranked list {self.source!r}")

    @property
    def ids(self) -> list[str]:
        return [d for d, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def to_json(self) -> dict:
        return {"source": self.source, "entries": [[d, s] for d, s in self.entries]}

    @classmethod
    def from_json(cls, obj: Mapping) -> "RankedList":
        return cls(obj["source"], [(d, float(s)) for d, s in obj["entries"]])


@dataclass
class FusedList:
    source: str
    entries: list[tuple[str, int]]
    n: int
    probabilities: dict[str, float] = field(default_factory=dict)

    @property
    def ids(self) -> list[str]:
        return [d for d, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def to_json(self) -> dict:
        return {
            "source": self.source,
            "entries": [[d, c] for d, c in self.entries],
            "n": self.n,
            "probabilities": dict(sorted(self.probabilities.items())),
        }


@dataclass(frozen=True)
class FusionConfig:
    k: int = DEFAULT_K
    n: int = DEFAULT_DRAWS
    rng_seed: int = 0
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.n < 1:
            raise ValueError("n must be >= 1")


def fitness_scores(lists: Sequence[RankedList], weights: Sequence[float] | None = None) -> dict[str, list[float]]:
    """Reciprocal-rank fitness per list; a paper keeps one value per list it appears in."""
    if weights is not None and len(weights) != len(lists):
        raise ValueError("one weight per component list is required")
    fitness: dict[str, list[float]] = {}
    for j, rl in enumerate(lists):
        w = 1.0 if weights is None else float(weights[j])
        for rank, doc_id in enumerate(rl.ids, 1):
            fitness.setdefault(doc_id, []).append(w / rank)
    return fitness


def to_probabilities(fitness: Mapping[str, Sequence[float]]) -> dict[str, float]:
    if not fitness:
        raise ValueError("no fitness scores to normalize")
    summed = {d: math.fsum(v) for d, v in fitness.items()}
    total = math.fsum(summed.values())
    if not total > 0:
        raise ValueError("fitness scores sum to zero")
    return {d: s / total for d, s in summed.items()}


def fuse(lists: Sequence[RankedList], config: FusionConfig = FusionConfig(), source: str = "hybrid") -> FusedList:
    """Sample ``config.n`` papers with replacement and rank them by draw count.

    Ties in count fall back to higher probability, then ascending id.
    The draws consume one seeded PCG64 stream, so equal inputs give equal
    output.
    """
    fitness = fitness_scores(lists, config.weights)
    if not fitness:
        return FusedList(source, [], config.n, {})
    probs = to_probabilities(fitness)
    ids = sorted(probs)
    p = np.array([probs[d] for d in ids], dtype=np.float64)
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    rng = np.random.Generator(np.random.PCG64(config.rng_seed))
    u = rng.random(config.n)
    draws = np.searchsorted(cdf, u, side="right")
    counts = np.bincount(draws, minlength=len(ids))
    order = sorted(range(len(ids)), key=lambda i: (-counts[i], -p[i], ids[i]))
    entries = [(ids[i], int(counts[i])) for i in order[: config.k]]
    return FusedList(source, entries, config.n, probs)


# A component takes query tokens and a depth k and returns its ranked list.
Component = Callable[[Sequence[str], int], RankedList]


def hybrid12(query: Sequence[str], bm25_component: Component, hd2vout_component: Component, config: FusionConfig = FusionConfig()) -> FusedList:
    """BM25 and hd2vOUT trained on the same citing-orientation corpus."""
    lists = [bm25_component(query, config.k), hd2vout_component(query, config.k)]
    return fuse(lists, config, source="hybrid")


def hybrid23(
    query: Sequence[str],
    hd2vout_on_cited: Component,
    bm25_on_cited: Component,
    bm25_on_citing: Component,
    config: FusionConfig = FusionConfig(),
) -> FusedList:
    """Three components over two corpus orientations."""
    lists = [
        hd2vout_on_cited(query, config.k),
        bm25_on_cited(query, config.k),
        bm25_on_citing(query, config.k),
    ]
    return fuse(lists, config, source="hybrid23")


def dumps(result: RankedList | FusedList) -> str:
    return json.dumps(result.to_json(), ensure_ascii=False, sort_keys=True)
