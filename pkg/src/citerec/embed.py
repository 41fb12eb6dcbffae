"""Word and dual document embeddings (hyperdoc2vec) plus plain paragraph vectors.

Training alternates, document by document, between two negative-sampling
objectives sharing one set of parameters:

* content examples: predict each word from the mean of the document's IN
  vector and the surrounding words (PV-DM with mean composition);
* citation examples: predict the cited paper's OUT vector from the mean of
  the citing document's IN vector and the words around the marker.

The per-example loss is ``-log s(u.h) - sum_neg log s(-u_neg.h)`` with
``s`` the logistic function.  Updates are plain SGD in a single thread, so a
fixed seed reproduces the parameters bit for bit.
"""

from __future__ import annotations

import io
import json
import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numba
import numpy as np

from . import textproc
from .corpus import TrainingDocument
from .hybrid import RankedList

logger = logging.getLogger(__name__)

MODEL_FORMAT = "citerec-embeddings"
MODEL_VERSION = 1

CONTENT = 0
CITATION = 1

OUT = "OUT"
INOUT = "INOUT"
IN = "IN"


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 100
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    lr_start: float = 0.025
    lr_end: float = 0.0001
    subsample: float = 0.0
    rng_seed: int = 0
    infer_epochs: int = 300
    inout_weight: float = 0.5

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.negatives < 1:
            raise ValueError("negatives must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not 0.0 <= self.inout_weight <= 1.0:
            raise ValueError("inout_weight must lie in [0, 1]")


@dataclass
class EmbeddingSpace:
    dim: int
    words: list[str]
    word_counts: np.ndarray
    doc_ids: list[str]
    doc_counts: np.ndarray
    word_in: np.ndarray
    word_out: np.ndarray
    doc_in: np.ndarray
    doc_out: np.ndarray
    config: TrainConfig
    kind: str = "hd2v"
    word_index: dict[str, int] = field(init=False, repr=False)
    doc_index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.word_index = {w: i for i, w in enumerate(self.words)}
        self.doc_index = {d: i for i, d in enumerate(self.doc_ids)}

    def d_in(self, doc_id: str) -> np.ndarray:
        return self.doc_in[self.doc_index[doc_id]]

    def d_out(self, doc_id: str) -> np.ndarray:
        return self.doc_out[self.doc_index[doc_id]]

    def word_vector(self, word: str) -> np.ndarray:
        return self.word_in[self.word_index[word]]

    def copy(self) -> "EmbeddingSpace":
        return EmbeddingSpace(
            self.dim, list(self.words), self.word_counts.copy(), list(self.doc_ids), self.doc_counts.copy(),
            self.word_in.copy(), self.word_out.copy(), self.doc_in.copy(), self.doc_out.copy(),
            self.config, self.kind,
        )


# ---------------------------------------------------------------------------
# example tables


@dataclass
class Examples:
    """Flattened training examples in processing order.

    Example ``e`` has kind ``kind[e]``, owning document ``doc[e]``,
    target ``target[e]`` (a word index for content examples, a document
    index for citation examples) and context words
    ``ctx[ptr[e]:ptr[e + 1]]``.
    """

    kind: np.ndarray
    doc: np.ndarray
    target: np.ndarray
    ptr: np.ndarray
    ctx: np.ndarray

    def __len__(self) -> int:
        return len(self.kind)


def _build_tables(docs: Sequence[TrainingDocument]):
    word_counts: Counter = Counter()
    doc_counts: Counter = Counter()
    for d in docs:
        for t in d.tokens:
            if textproc.is_marker(t):
                doc_counts[textproc.marker_id(t)] += 1
            else:
                word_counts[t] += 1
    words = sorted(word_counts, key=lambda w: (-word_counts[w], w))
    doc_ids = sorted(d.id for d in docs)
    if len(set(doc_ids)) != len(doc_ids):
        raise ValueError("duplicate training document ids")
    return (
        words,
        np.array([word_counts[w] for w in words], dtype=np.int64),
        doc_ids,
        np.array([doc_counts.get(d, 0) for d in doc_ids], dtype=np.int64),
    )


def build_examples(
    docs: Sequence[TrainingDocument],
    word_index: dict[str, int],
    doc_index: dict[str, int],
    window: int,
    citation: bool = True,
) -> Examples:
    kind, owner, target, ptr, ctx = [], [], [], [0], []
    for d in sorted(docs, key=lambda d: d.id):
        di = doc_index[d.id]
        seq: list[int] = []
        marks: list[tuple[int, int]] = []
        for t in d.tokens:
            if textproc.is_marker(t):
                cid = textproc.marker_id(t)
                if cid in doc_index:
                    marks.append((len(seq), doc_index[cid]))
            elif t in word_index:
                seq.append(word_index[t])
        n = len(seq)
        for i, w in enumerate(seq):
            kind.append(CONTENT)
            owner.append(di)
            target.append(w)
            ctx.extend(seq[max(0, i - window) : i])
            ctx.extend(seq[i + 1 : i + 1 + window])
            ptr.append(len(ctx))
        if citation:
            for pos, tgt in marks:
                kind.append(CITATION)
                owner.append(di)
                target.append(tgt)
                ctx.extend(seq[max(0, pos - window) : min(n, pos + window)])
                ptr.append(len(ctx))
    return Examples(
        np.array(kind, dtype=np.int8),
        np.array(owner, dtype=np.int64),
        np.array(target, dtype=np.int64),
        np.array(ptr, dtype=np.int64),
        np.array(ctx, dtype=np.int64),
    )


def _cdf(counts: np.ndarray) -> np.ndarray:
    weights = counts.astype(np.float64) ** 0.75
    total = weights.sum()
    if total <= 0:
        return np.zeros(0)
    cdf = np.cumsum(weights / total)
    cdf[-1] = 1.0
    return cdf


def draw_negatives(rng: np.random.Generator, ex: Examples, word_cdf: np.ndarray, doc_cdf: np.ndarray, k: int) -> np.ndarray:
    """Negative samples for every example, words or documents by example kind (unigram^0.75)."""
    u = rng.random((len(ex), k))
    neg = np.empty((len(ex), k), dtype=np.int64)
    is_cit = ex.kind == CITATION
    if (~is_cit).any():
        neg[~is_cit] = np.searchsorted(word_cdf, u[~is_cit], side="right")
    if is_cit.any():
        neg[is_cit] = np.searchsorted(doc_cdf, u[is_cit], side="right")
    return neg


# ---------------------------------------------------------------------------
# loss and gradients


def _log_sigmoid(x: np.ndarray) -> np.ndarray:
    return -np.logaddexp(0.0, -x)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def example_loss(h: np.ndarray, pos: np.ndarray, negs: np.ndarray) -> float:
    """Negative-sampling loss for one hidden vector ``h``.

    ``pos`` is the positive output vector, ``negs`` the rows of negative
    output vectors.
    """
    return float(-_log_sigmoid(pos @ h) - _log_sigmoid(-(negs @ h)).sum())


def _params(space: EmbeddingSpace) -> dict[str, np.ndarray]:
    return {"word_in": space.word_in, "word_out": space.word_out, "doc_in": space.doc_in, "doc_out": space.doc_out}


def _example_parts(space: EmbeddingSpace, ex: Examples, negatives: np.ndarray, e: int):
    kind = ex.kind[e]
    ctx = ex.ctx[ex.ptr[e] : ex.ptr[e + 1]]
    out_name = "word_out" if kind == CONTENT else "doc_out"
    negs = [j for j in negatives[e] if j != ex.target[e]]
    return ctx, out_name, negs


def total_loss(space: EmbeddingSpace, ex: Examples, negatives: np.ndarray) -> float:
    """Summed loss of all examples at the current parameters (no updates)."""
    p = _params(space)
    loss = 0.0
    for e in range(len(ex)):
        ctx, out_name, negs = _example_parts(space, ex, negatives, e)
        h = (p["doc_in"][ex.doc[e]] + p["word_in"][ctx].sum(axis=0)) / (1 + len(ctx))
        out = p[out_name]
        loss += example_loss(h, out[ex.target[e]], out[negs])
    return loss


def total_gradient(space: EmbeddingSpace, ex: Examples, negatives: np.ndarray) -> dict[str, np.ndarray]:
    """Analytic gradient of :func:`total_loss` with respect to every parameter matrix."""
    p = _params(space)
    grads = {name: np.zeros_like(m) for name, m in p.items()}
    for e in range(len(ex)):
        ctx, out_name, negs = _example_parts(space, ex, negatives, e)
        count = 1 + len(ctx)
        h = (p["doc_in"][ex.doc[e]] + p["word_in"][ctx].sum(axis=0)) / count
        out = p[out_name]
        rows = [ex.target[e], *negs]
        labels = np.array([1.0] + [0.0] * len(negs))
        u = out[rows]
        coef = _sigmoid(u @ h) - labels
        grad_h = coef @ u
        for r, c in zip(rows, coef):
            grads[out_name][r] += c * h
        grads["doc_in"][ex.doc[e]] += grad_h / count
        for w in ctx:
            grads["word_in"][w] += grad_h / count
    return grads


# ---------------------------------------------------------------------------
# SGD kernels


@numba.njit(cache=True)
def _sigmoid_scalar(x):
    if x >= 0:
        z = math.exp(-x)
        return 1.0 / (1.0 + z)
    z = math.exp(x)
    return z / (1.0 + z)


@numba.njit(cache=True)
def _ns_step(h, out, target, negs, lr, grad_h):
    """One negative-sampling SGD step on the output rows; returns dL/dh in ``grad_h``."""
    grad_h[:] = 0.0
    for j in range(negs.shape[0] + 1):
        if j == 0:
            row = target
            label = 1.0
        else:
            row = negs[j - 1]
            if row == target:
                continue
            label = 0.0
        f = 0.0
        for i in range(h.shape[0]):
            f += out[row, i] * h[i]
        g = _sigmoid_scalar(f) - label
        for i in range(h.shape[0]):
            grad_h[i] += g * out[row, i]
            out[row, i] -= lr * g * h[i]


@numba.njit(cache=True)
def _run_examples(
    kind, doc, target, ptr, ctx, negatives, keep,
    word_in, word_out, doc_in, doc_out,
    lr_start, lr_end, step0, total_steps, update_inputs_words,
):
    dim = word_in.shape[1]
    h = np.empty(dim)
    grad_h = np.empty(dim)
    for e in range(kind.shape[0]):
        step = step0 + e
        if not keep[e]:
            continue
        lr = lr_start - (lr_start - lr_end) * (step / total_steps)
        d = doc[e]
        a, b = ptr[e], ptr[e + 1]
        count = 1 + b - a
        for i in range(dim):
            h[i] = doc_in[d, i]
        for c in range(a, b):
            w = ctx[c]
            for i in range(dim):
                h[i] += word_in[w, i]
        for i in range(dim):
            h[i] /= count
        if kind[e] == 0:
            _ns_step(h, word_out, target[e], negatives[e], lr, grad_h)
        else:
            _ns_step(h, doc_out, target[e], negatives[e], lr, grad_h)
        scale = lr / count
        for i in range(dim):
            doc_in[d, i] -= scale * grad_h[i]
        if update_inputs_words:
            for c in range(a, b):
                w = ctx[c]
                for i in range(dim):
                    word_in[w, i] -= scale * grad_h[i]


@numba.njit(cache=True)
def _run_inference(target, ptr, ctx, negatives, word_in, word_out, vec, lr_start, lr_end, step0, total_steps):
    """Fit a single document vector with every other parameter frozen."""
    dim = vec.shape[0]
    h = np.empty(dim)
    grad_h = np.empty(dim)
    for e in range(target.shape[0]):
        lr = lr_start - (lr_start - lr_end) * ((step0 + e) / total_steps)
        a, b = ptr[e], ptr[e + 1]
        count = 1 + b - a
        for i in range(dim):
            h[i] = vec[i]
        for c in range(a, b):
            for i in range(dim):
                h[i] += word_in[ctx[c], i]
        for i in range(dim):
            h[i] /= count
        # forward and dL/dh only: output rows stay frozen
        grad_h[:] = 0.0
        for j in range(negatives.shape[1] + 1):
            if j == 0:
                row = target[e]
                label = 1.0
            else:
                row = negatives[e, j - 1]
                if row == target[e]:
                    continue
                label = 0.0
            f = 0.0
            for i in range(dim):
                f += word_out[row, i] * h[i]
            g = _sigmoid_scalar(f) - label
            for i in range(dim):
                grad_h[i] += g * word_out[row, i]
        for i in range(dim):
            vec[i] -= lr / count * grad_h[i]


# ---------------------------------------------------------------------------
# training


def _initial_space(docs: Sequence[TrainingDocument], config: TrainConfig, kind: str) -> tuple[EmbeddingSpace, np.random.Generator]:
    words, wc, doc_ids, dc = _build_tables(docs)
    rng = np.random.Generator(np.random.PCG64(config.rng_seed))
    d = config.dim
    bound = 0.5 / d
    space = EmbeddingSpace(
        dim=d,
        words=words,
        word_counts=wc,
        doc_ids=doc_ids,
        doc_counts=dc,
        word_in=rng.uniform(-bound, bound, (len(words), d)),
        word_out=np.zeros((len(words), d)),
        doc_in=rng.uniform(-bound, bound, (len(doc_ids), d)),
        doc_out=np.zeros((len(doc_ids), d)),
        config=config,
        kind=kind,
    )
    return space, rng


def _keep_mask(rng: np.random.Generator, ex: Examples, word_counts: np.ndarray, threshold: float) -> np.ndarray:
    keep = np.ones(len(ex), dtype=np.bool_)
    if threshold <= 0:
        return keep
    freq = word_counts / word_counts.sum()
    p_keep = np.minimum(1.0, np.sqrt(threshold / freq) + threshold / freq)
    content = ex.kind == CONTENT
    u = rng.random(len(ex))
    keep[content] = u[content] < p_keep[ex.target[content]]
    return keep


def _train(docs: Sequence[TrainingDocument], config: TrainConfig, citation: bool) -> EmbeddingSpace:
    docs = list(docs)
    if not docs:
        raise ValueError("cannot train on an empty corpus")
    space, rng = _initial_space(docs, config, "hd2v" if citation else "doc2vec")
    if citation and space.doc_counts.sum() == 0:
        raise ValueError("corpus has no citation markers; the citation pass cannot run")
    ex = build_examples(docs, space.word_index, space.doc_index, config.window, citation=citation)
    word_cdf = _cdf(space.word_counts)
    doc_cdf = _cdf(space.doc_counts) if citation else np.ones(1)
    total = max(1, len(ex) * config.epochs)
    for epoch in range(config.epochs):
        negs = draw_negatives(rng, ex, word_cdf, doc_cdf, config.negatives)
        keep = _keep_mask(rng, ex, space.word_counts, config.subsample)
        _run_examples(
            ex.kind, ex.doc, ex.target, ex.ptr, ex.ctx, negs, keep,
            space.word_in, space.word_out, space.doc_in, space.doc_out,
            config.lr_start, config.lr_end, epoch * len(ex), total, True,
        )
        logger.debug("epoch %d/%d done (%d examples)", epoch + 1, config.epochs, len(ex))
    if not citation:
        space.doc_out = space.doc_in.copy()
    for name, m in _params(space).items():
        if not np.isfinite(m).all():
            raise FloatingPointError(f"non-finite values in {name} after training")
    return space


def train_hd2v(training_docs: Sequence[TrainingDocument], config: TrainConfig = TrainConfig()) -> EmbeddingSpace:
    """Train word vectors with IN and OUT document vectors on a marker-bearing corpus."""
    return _train(training_docs, config, citation=True)


def train_doc2vec(training_docs: Sequence[TrainingDocument], config: TrainConfig = TrainConfig()) -> EmbeddingSpace:
    """Paragraph vectors: the content objective only.  ``doc_out`` mirrors ``doc_in``."""
    return _train(training_docs, config, citation=False)


# ---------------------------------------------------------------------------
# querying


class ContextVector(NamedTuple):
    vector: np.ndarray
    all_oov: bool


def infer_context_vector(space: EmbeddingSpace, query_tokens: Sequence[str], config: TrainConfig | None = None) -> ContextVector:
    """Vector for a citation context.

    hd2v spaces use the mean IN vector of the in-vocabulary words.  doc2vec
    spaces fit a fresh paragraph vector against the frozen model.
    """
    config = config or space.config
    idx = [space.word_index[t] for t in query_tokens if t in space.word_index]
    if not idx:
        logger.warning("no query token is in the vocabulary")
        return ContextVector(np.zeros(space.dim), True)
    if space.kind != "doc2vec":
        return ContextVector(space.word_in[idx].mean(axis=0), False)

    rng = np.random.Generator(np.random.PCG64(config.rng_seed))
    bound = 0.5 / space.dim
    vec = rng.uniform(-bound, bound, space.dim)
    target, ptr, ctx = [], [0], []
    for i, w in enumerate(idx):
        target.append(w)
        ctx.extend(idx[max(0, i - config.window) : i])
        ctx.extend(idx[i + 1 : i + 1 + config.window])
        ptr.append(len(ctx))
    target = np.array(target, dtype=np.int64)
    ptr = np.array(ptr, dtype=np.int64)
    ctx = np.array(ctx, dtype=np.int64)
    word_cdf = _cdf(space.word_counts)
    steps = config.infer_epochs
    total = max(1, steps * len(target))
    for s in range(steps):
        negs = np.searchsorted(word_cdf, rng.random((len(target), config.negatives)), side="right")
        _run_inference(target, ptr, ctx, negs, space.word_in, space.word_out, vec,
                       config.lr_start, config.lr_end, s * len(target), total)
    return ContextVector(vec, False)


def _unit_rows(m: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    return np.divide(m, norms, out=np.zeros_like(m), where=norms > 0)


def cosine_scores(space: EmbeddingSpace, query_vector: np.ndarray, mode: str = OUT, inout_weight: float | None = None) -> np.ndarray:
    """Cosine score of every document, aligned with ``space.doc_ids``."""
    q = np.asarray(query_vector, dtype=np.float64)
    qn = np.linalg.norm(q)
    if qn == 0:
        return np.zeros(len(space.doc_ids))
    q = q / qn
    if mode == OUT:
        return _unit_rows(space.doc_out) @ q
    if mode == IN:
        return _unit_rows(space.doc_in) @ q
    if mode == INOUT:
        w = space.config.inout_weight if inout_weight is None else inout_weight
        return w * (_unit_rows(space.doc_out) @ q) + (1.0 - w) * (_unit_rows(space.doc_in) @ q)
    raise ValueError(f"unknown scoring mode {mode!r}")


def score_hd2v(space: EmbeddingSpace, query_vector: np.ndarray, mode: str = OUT, k: int = 500,
               inout_weight: float | None = None, source: str | None = None) -> RankedList:
    """Top-k papers by cosine to the OUT vectors (or the IN/OUT mix)."""
    source = source or ("hd2v" + mode if space.kind == "hd2v" else space.kind)
    if not np.any(query_vector):
        return RankedList(source, [])
    scores = cosine_scores(space, query_vector, mode, inout_weight)
    # doc_ids are sorted, so a stable sort breaks ties by ascending id
    order = np.argsort(-scores, kind="stable")[:k]
    return RankedList(source, [(space.doc_ids[i], float(scores[i])) for i in order])


# ---------------------------------------------------------------------------
# persistence


def save_space(space: EmbeddingSpace, path: str | Path) -> None:
    header = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": space.kind,
        "dim": space.dim,
        "vocab_size": len(space.words),
        "doc_count": len(space.doc_ids),
        "config": asdict(space.config),
        "words": space.words,
        "doc_ids": space.doc_ids,
    }
    blob = json.dumps(header, ensure_ascii=False, sort_keys=True).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        for arr in (space.word_counts, space.doc_counts, space.word_in, space.word_out, space.doc_in, space.doc_out):
            np.save(fh, np.ascontiguousarray(arr), allow_pickle=False)


def load_space(path: str | Path) -> EmbeddingSpace:
    data = Path(path).read_bytes()
    n = int.from_bytes(data[:8], "little")
    header = json.loads(data[8 : 8 + n].decode("utf-8"))
    if header.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path} is not an embedding model file")
    if header.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {header.get('version')}")
    fh = io.BytesIO(data[8 + n :])
    arrays = [np.load(fh, allow_pickle=False) for _ in range(6)]
    return EmbeddingSpace(
        header["dim"], header["words"], arrays[0], header["doc_ids"], arrays[1],
        arrays[2], arrays[3], arrays[4], arrays[5], TrainConfig(**header["config"]), header["kind"],
    )
