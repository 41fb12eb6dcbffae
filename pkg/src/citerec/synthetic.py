"""Synthetic citation corpora with planted lexical and citation structure.

Papers belong to disjoint topical clusters.  Every paper owns a private
pool of *content* words (used in its own title and abstract) and a
private pool of *reference* words (used only by other papers when they
cite it).  A citation context citing paper X is written either with X's
content words ("lexical" contexts, matchable against X's own text) or
with X's reference words ("citation-pattern" contexts, only learnable from
how others cite X).  Cluster words and stop words are mixed in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import CitationContext, Document

_FILLER = ("the", "of", "and", "in", "we", "this", "for", "with", "is", "as", "by", "on", "an")
_GENERIC = tuple(f"gen{i}" for i in range(40))


@dataclass(frozen=True)
class SyntheticSpec:
    clusters: int = 5
    papers_per_cluster: int = 40
    test_fraction: float = 0.15
    train_years: tuple[int, int] = (2000, 2015)
    test_year: int = 2016
    cluster_words: int = 30
    content_words: int = 4
    reference_words: int = 4
    abstract_words: int = 4
    abstract_length: int = 40
    # fraction of abstract tokens drawn from the paper's own content words
    abstract_own_share: float = 0.4
    citations_per_paper: int = 4
    # citation probability of the r-th training paper of a cluster is proportional to r ** -popularity_skew
    popularity_skew: float = 0.0
    context_topic_words: int = 5
    context_cluster_words: int = 3
    context_generic_words: int = 2
    context_fillers: int = 3
    train_reference_rate: float = 0.0
    test_reference_rate: float = 0.0


@dataclass
class SyntheticCorpus:
    documents: list[Document]
    cluster_of: dict[str, int]
    # for every test context text: "content" or "reference"
    context_mode: dict[str, str]


def _paper_id(c: int, j: int) -> str:
    return f"P{c}-{j:03d}"


def generate(spec: SyntheticSpec = SyntheticSpec(), seed: int = 0) -> SyntheticCorpus:
    rng = np.random.Generator(np.random.PCG64(seed))
    n_test = int(round(spec.papers_per_cluster * spec.test_fraction))
    n_train = spec.papers_per_cluster - n_test
    lo, hi = spec.train_years

    def pick(pool, n):
        return [pool[i] for i in rng.integers(0, len(pool), n)]

    docs: list[Document] = []
    cluster_of: dict[str, int] = {}
    context_mode: dict[str, str] = {}
    for c in range(spec.clusters):
        cluster_pool = [f"clu{c}w{i}" for i in range(spec.cluster_words)]
        ids = [_paper_id(c, j) for j in range(spec.papers_per_cluster)]
        content = {pid: [f"{pid.lower().replace('-', 'x')}c{i}" for i in range(spec.content_words)] for pid in ids}
        reference = {pid: [f"{pid.lower().replace('-', 'x')}r{i}" for i in range(spec.reference_words)] for pid in ids}
        train_ids = ids[:n_train]

        def context(target: str, mode: str) -> str:
            pool = reference[target] if mode == "reference" else content[target]
            ws = (
                pick(pool, spec.context_topic_words)
                + pick(cluster_pool, spec.context_cluster_words)
                + pick(_GENERIC, spec.context_generic_words)
                + pick(_FILLER, spec.context_fillers)
            )
            rng.shuffle(ws)
            return " ".join(ws) + "."

        for j, pid in enumerate(ids):
            is_test = j >= n_train
            year = spec.test_year if is_test else int(lo + (hi - lo) * j // max(1, n_train - 1))
            own = content[pid][: spec.abstract_words]
            title = " ".join(pick(own, 3) + pick(cluster_pool, 2))
            n_own = int(round(spec.abstract_length * spec.abstract_own_share))
            rest = spec.abstract_length - n_own
            abs_words = pick(own, n_own) + pick(cluster_pool, rest // 2) + pick(_FILLER, rest - rest // 2)
            rng.shuffle(abs_words)
            abstract = " ".join(abs_words)
            candidates = [t for t in train_ids if t != pid]
            weights = np.array([(train_ids.index(t) + 1.0) ** -spec.popularity_skew for t in candidates])
            targets = rng.choice(
                len(candidates), size=min(spec.citations_per_paper, len(candidates)), replace=False, p=weights / weights.sum()
            )
            rate = spec.test_reference_rate if is_test else spec.train_reference_rate
            contexts = []
            for ti in sorted(targets):
                target = candidates[ti]
                mode = "reference" if rng.random() < rate else "content"
                text = context(target, mode)
                if is_test:
                    context_mode[" ".join(text.split())] = mode
                contexts.append(CitationContext(text, (target,)))
            docs.append(Document(pid, year, title, abstract, tuple(contexts)))
            cluster_of[pid] = c
    docs.sort(key=lambda d: d.id)
    return SyntheticCorpus(docs, cluster_of, context_mode)


def topic_corpus(seed: int = 0, docs: int = 40, length: int = 50, vocab: int = 20) -> tuple[list[list[str]], list[set[str]]]:
    """Documents each drawn entirely from one of two disjoint vocabularies."""
    rng = np.random.Generator(np.random.PCG64(seed))
    topics = [[f"alpha{i}" for i in range(vocab)], [f"beta{i}" for i in range(vocab)]]
    texts = []
    for d in range(docs):
        pool = topics[d % 2]
        texts.append([pool[i] for i in rng.integers(0, vocab, length)])
    return texts, [set(t) for t in topics]


# The corpus shipped in citerec/data: year ranges match the CLI defaults.
BUNDLED_SPEC = SyntheticSpec(
    train_years=(2000, 2016), test_year=2017, train_reference_rate=0.5, test_reference_rate=0.5
)
BUNDLED_SEED = 0


def bundled_path():
    from importlib import resources

    return resources.files("citerec").joinpath("data/synthetic_corpus.jsonl")
