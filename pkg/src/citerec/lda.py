"""Collapsed Gibbs sampling LDA and topic-similarity recommendation."""

from __future__ import annotations

import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numba
import numpy as np

from . import textproc
from .corpus import TrainingDocument
from .hybrid import RankedList

logger = logging.getLogger(__name__)

MODEL_FORMAT = "citerec-lda"
MODEL_VERSION = 1

# topic counts for full-size corpora; the desk defaults below are much smaller
LARGE_CORPUS_TOPICS = 300
SMALL_CORPUS_TOPICS = 200
DEFAULT_TOPICS = 20
DEFAULT_SWEEPS = 200
INFER_SWEEPS = 20
INFER_BURN_IN = 10


@dataclass
class LdaModel:
    num_topics: int
    alpha: float
    beta: float
    vocabulary: list[str]
    doc_ids: list[str]
    topic_word: np.ndarray  # T x V counts
    doc_topic: np.ndarray  # D x T counts
    word_index: dict[str, int] = field(init=False, repr=False)
    doc_index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.word_index = {w: i for i, w in enumerate(self.vocabulary)}
        self.doc_index = {d: i for i, d in enumerate(self.doc_ids)}

    @property
    def topic_totals(self) -> np.ndarray:
        return self.topic_word.sum(axis=1)

    def doc_distributions(self) -> np.ndarray:
        """Row-normalized doc-topic counts; empty documents get the uniform distribution."""
        rows = self.doc_topic.astype(np.float64)
        sums = rows.sum(axis=1, keepdims=True)
        uniform = np.full_like(rows, 1.0 / self.num_topics)
        return np.divide(rows, sums, out=uniform, where=sums > 0)

    def top_words(self, topic: int, n: int = 10) -> list[str]:
        order = np.lexsort((np.arange(len(self.vocabulary)), -self.topic_word[topic]))
        return [self.vocabulary[i] for i in order[:n]]


def default_alpha(num_topics: int) -> float:
    return 50.0 / num_topics


def _corpus_arrays(docs: Sequence[TrainingDocument]):
    docs = sorted(docs, key=lambda d: d.id)
    vocab = sorted({t for d in docs for t in d.tokens if not textproc.is_marker(t)})
    index = {w: i for i, w in enumerate(vocab)}
    words, owners = [], []
    for di, d in enumerate(docs):
        for t in d.tokens:
            if not textproc.is_marker(t):
                words.append(index[t])
                owners.append(di)
    return [d.id for d in docs], vocab, np.array(words, dtype=np.int64), np.array(owners, dtype=np.int64)


@numba.njit(cache=True)
def _gibbs_sweep(words, owners, z, topic_word, doc_topic, topic_totals, alpha, beta, uniforms, update_topics, probs):
    num_topics = topic_word.shape[0]
    vbeta = topic_word.shape[1] * beta
    for i in range(words.shape[0]):
        w = words[i]
        d = owners[i]
        t = z[i]
        doc_topic[d, t] -= 1
        if update_topics:
            topic_word[t, w] -= 1
            topic_totals[t] -= 1
        total = 0.0
        for k in range(num_topics):
            p = (doc_topic[d, k] + alpha) * (topic_word[k, w] + beta) / (topic_totals[k] + vbeta)
            total += p
            probs[k] = total
        u = uniforms[i] * total
        t = num_topics - 1
        for k in range(num_topics):
            if u < probs[k]:
                t = k
                break
        z[i] = t
        doc_topic[d, t] += 1
        if update_topics:
            topic_word[t, w] += 1
            topic_totals[t] += 1


def conditional(model: LdaModel, doc_topic_row: np.ndarray, word: int, topic_totals: np.ndarray | None = None) -> np.ndarray:
    """Normalized full conditional p(z = k | rest) for one token already removed from the counts."""
    tt = model.topic_totals if topic_totals is None else topic_totals
    v = model.topic_word.shape[1]
    p = (doc_topic_row + model.alpha) * (model.topic_word[:, word] + model.beta) / (tt + v * model.beta)
    return p / p.sum()


def train_lda(
    training_docs: Sequence[TrainingDocument],
    num_topics: int = DEFAULT_TOPICS,
    alpha: float | None = None,
    beta: float = 0.01,
    iterations: int = DEFAULT_SWEEPS,
    seed: int = 0,
) -> LdaModel:
    """Fit topics by collapsed Gibbs sampling; markers are ignored."""
    if num_topics < 2:
        raise ValueError("num_topics must be >= 2")
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    alpha = default_alpha(num_topics) if alpha is None else alpha
    doc_ids, vocab, words, owners = _corpus_arrays(training_docs)
    if len(words) == 0:
        raise ValueError("cannot train LDA on an empty corpus")
    rng = np.random.Generator(np.random.PCG64(seed))
    z = rng.integers(0, num_topics, len(words)).astype(np.int64)
    topic_word = np.zeros((num_topics, len(vocab)), dtype=np.int64)
    doc_topic = np.zeros((len(doc_ids), num_topics), dtype=np.int64)
    np.add.at(topic_word, (z, words), 1)
    np.add.at(doc_topic, (owners, z), 1)
    totals = topic_word.sum(axis=1)
    probs = np.empty(num_topics)
    for sweep in range(iterations):
        _gibbs_sweep(words, owners, z, topic_word, doc_topic, totals, alpha, beta, rng.random(len(words)), True, probs)
        if (sweep + 1) % 50 == 0:
            logger.debug("lda sweep %d/%d", sweep + 1, iterations)
    return LdaModel(num_topics, alpha, beta, vocab, doc_ids, topic_word, doc_topic)


class TopicDistribution(NamedTuple):
    probabilities: np.ndarray
    all_oov: bool


def infer_topics(
    model: LdaModel,
    query_tokens: Sequence[str],
    iterations: int = INFER_SWEEPS,
    seed: int = 0,
    burn_in: int = INFER_BURN_IN,
) -> TopicDistribution:
    """Topic mixture of a query with ``topic_word`` frozen.

    The smoothed doc-topic estimate (counts + alpha) is averaged over the
    sweeps after ``burn_in``.
    """
    words = np.array([model.word_index[t] for t in query_tokens if t in model.word_index], dtype=np.int64)
    T = model.num_topics
    if len(words) == 0:
        return TopicDistribution(np.full(T, 1.0 / T), True)
    rng = np.random.Generator(np.random.PCG64(seed))
    z = rng.integers(0, T, len(words)).astype(np.int64)
    owners = np.zeros(len(words), dtype=np.int64)
    doc_topic = np.zeros((1, T), dtype=np.int64)
    np.add.at(doc_topic, (owners, z), 1)
    topic_word = model.topic_word.copy()
    totals = model.topic_totals.copy()
    probs = np.empty(T)
    acc = np.zeros(T)
    kept = 0
    for sweep in range(max(iterations, 1)):
        _gibbs_sweep(words, owners, z, topic_word, doc_topic, totals, model.alpha, model.beta,
                     rng.random(len(words)), False, probs)
        if sweep >= min(burn_in, max(iterations, 1) - 1):
            acc += (doc_topic[0] + model.alpha) / (len(words) + T * model.alpha)
            kept += 1
    dist = acc / kept
    return TopicDistribution(dist / dist.sum(), False)


def score_lda(model: LdaModel, query_dist: np.ndarray, k: int = 500, source: str = "lda") -> RankedList:
    """Rank documents by cosine between the query mixture and each document's mixture."""
    rows = model.doc_distributions()
    q = np.asarray(query_dist, dtype=np.float64)
    norms = np.linalg.norm(rows, axis=1) * np.linalg.norm(q)
    scores = np.divide(rows @ q, norms, out=np.zeros(len(rows)), where=norms > 0)
    order = np.argsort(-scores, kind="stable")[:k]
    return RankedList(source, [(model.doc_ids[i], float(scores[i])) for i in order])


def save_lda(model: LdaModel, path: str | Path) -> None:
    header = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "num_topics": model.num_topics,
        "alpha": model.alpha,
        "beta": model.beta,
        "vocabulary": model.vocabulary,
        "doc_ids": model.doc_ids,
    }
    blob = json.dumps(header, ensure_ascii=False, sort_keys=True).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        np.save(fh, model.topic_word, allow_pickle=False)
        np.save(fh, model.doc_topic, allow_pickle=False)


def load_lda(path: str | Path) -> LdaModel:
    data = Path(path).read_bytes()
    n = int.from_bytes(data[:8], "little")
    header = json.loads(data[8 : 8 + n].decode("utf-8"))
    if header.get("format") != MODEL_FORMAT or header.get("version") != MODEL_VERSION:
        raise ValueError(f"{path} is not a supported LDA model file")
    fh = io.BytesIO(data[8 + n :])
    tw = np.load(fh, allow_pickle=False)
    dt = np.load(fh, allow_pickle=False)
    return LdaModel(header["num_topics"], header["alpha"], header["beta"], header["vocabulary"], header["doc_ids"], tw, dt)
