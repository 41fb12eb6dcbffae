"""Paper records, pseudo full text corpora and test-set construction."""

from __future__ import annotations

import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from . import textproc

logger = logging.getLogger(__name__)

CITING = "citing"
CITED = "cited"

MIN_QUERY_WORDS = 9


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class CitationContext:
    text: str
    cited_ids: tuple[str, ...]


@dataclass(frozen=True)
class Document:
    id: str
    year: int
    title: str = ""
    abstract: str = ""
    contexts: tuple[CitationContext, ...] = ()

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "year": self.year,
            "title": self.title,
            "abstract": self.abstract,
            "contexts": [{"text": c.text, "cited_ids": list(c.cited_ids)} for c in self.contexts],
        }


@dataclass(frozen=True)
class TrainingDocument:
    id: str
    tokens: tuple[str, ...]
    orientation: str

    def markers(self) -> list[str]:
        return [textproc.marker_id(t) for t in self.tokens if textproc.is_marker(t)]

    def to_json(self) -> dict:
        return {"id": self.id, "orientation": self.orientation, "tokens": list(self.tokens)}

    @classmethod
    def from_json(cls, obj: Mapping) -> "TrainingDocument":
        return cls(obj["id"], tuple(obj["tokens"]), obj["orientation"])


@dataclass(frozen=True)
class TestQuery:
    __test__ = False  # not a pytest test class despite the name

    id: str
    text: str
    context_tokens: tuple[str, ...]
    ground_truth: frozenset[str]
    source_year: int

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "context_tokens": list(self.context_tokens),
            "ground_truth": sorted(self.ground_truth),
            "source_year": self.source_year,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "TestQuery":
        return cls(
            obj["id"],
            obj["text"],
            tuple(obj["context_tokens"]),
            frozenset(obj["ground_truth"]),
            int(obj["source_year"]),
        )


@dataclass
class LoadReport:
    """Outcome of :func:`load_corpus`: the documents plus everything skipped."""

    documents: list[Document]
    rejected: list[tuple[int, str]] = field(default_factory=list)
    dropped_contexts: int = 0
    dangling_ids: set[str] = field(default_factory=set)


# ---------------------------------------------------------------------------
# loading / saving


def _parse_record(obj) -> tuple[Document, int]:
    if not isinstance(obj, dict):
        raise CorpusError("record is not a JSON object")
    doc_id = obj.get("id")
    if not isinstance(doc_id, str) or not doc_id:
        raise CorpusError("missing or empty 'id'")
    year = obj.get("year")
    if isinstance(year, bool) or not isinstance(year, int):
        raise CorpusError("missing or non-integer 'year'")
    contexts = []
    dropped = 0
    for ctx in obj.get("contexts") or []:
        if not isinstance(ctx, dict) or not isinstance(ctx.get("text"), str):
            raise CorpusError("malformed context")
        cited = []
        for cid in ctx.get("cited_ids") or []:
            if not isinstance(cid, str) or not cid or textproc.MARKER_SUFFIX in cid:
                raise CorpusError(f"invalid cited id {cid!r}")
            if cid not in cited:
                cited.append(cid)
        if not cited:
            dropped += 1
            continue
        contexts.append(CitationContext(ctx["text"], tuple(cited)))
    doc = Document(
        id=doc_id,
        year=year,
        title=obj.get("title") or "",
        abstract=obj.get("abstract") or "",
        contexts=tuple(contexts),
    )
    return doc, dropped


def load_corpus(path: str | Path) -> LoadReport:
    """Read a JSONL corpus.

    Malformed lines and records without id/year are skipped and listed in
    ``rejected`` with their 1-based line number.  Contexts with no cited
    ids are dropped (the document is kept).  A repeated id is fatal.
    """
    path = Path(path)
    try:
        fh = path.open(encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read corpus file {path}: {exc}") from exc

    report = LoadReport(documents=[])
    seen: set[str] = set()
    with fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                doc, dropped = _parse_record(json.loads(line))
            except (json.JSONDecodeError, CorpusError) as exc:
                report.rejected.append((lineno, str(exc)))
                logger.warning("%s:%d: skipped record: %s", path, lineno, exc)
                continue
            if doc.id in seen:
                raise CorpusError(f"duplicate document id {doc.id!r} at line {lineno}")
            seen.add(doc.id)
            if dropped:
                logger.warning("%s:%d: dropped %d context(s) without cited ids", path, lineno, dropped)
            report.dropped_contexts += dropped
            report.documents.append(doc)

    for doc in report.documents:
        for ctx in doc.contexts:
            report.dangling_ids.update(c for c in ctx.cited_ids if c not in seen)
    if report.dangling_ids:
        logger.info("%d cited ids point outside the corpus", len(report.dangling_ids))
    return report


def save_corpus(docs: Iterable[Document], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc.to_json(), ensure_ascii=False, sort_keys=True) + "\n")


def save_training_docs(docs: Iterable[TrainingDocument], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc.to_json(), ensure_ascii=False, sort_keys=True) + "\n")


def load_training_docs(path: str | Path) -> list[TrainingDocument]:
    with Path(path).open(encoding="utf-8") as fh:
        return [TrainingDocument.from_json(json.loads(line)) for line in fh if line.strip()]


def save_queries(queries: Iterable[TestQuery], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for q in queries:
            fh.write(json.dumps(q.to_json(), ensure_ascii=False, sort_keys=True) + "\n")


def load_queries(path: str | Path) -> list[TestQuery]:
    with Path(path).open(encoding="utf-8") as fh:
        return [TestQuery.from_json(json.loads(line)) for line in fh if line.strip()]


# ---------------------------------------------------------------------------
# pseudo full text


def _with_markers(text: str, cited_ids: Iterable[str], known: set[str] | frozenset[str]) -> list[str]:
    """Context words with one marker per known cited id inserted after floor(len/2) words."""
    ws = textproc.words(text)
    marks = [textproc.marker(c) for c in sorted(set(cited_ids)) if c in known]
    mid = len(ws) // 2
    return ws[:mid] + marks + ws[mid:]


def _header(doc: Document) -> list[str]:
    if not doc.title.strip():
        logger.warning("document %s has an empty title", doc.id)
    return textproc.words(doc.title) + textproc.words(doc.abstract)


def build_pseudo_fulltext(docs: Iterable[Document]) -> list[TrainingDocument]:
    """Citing orientation: title, abstract, then the document's own contexts.

    Markers are only emitted for cited ids present in ``docs``.
    """
    docs = list(docs)
    known = {d.id for d in docs}
    out = []
    for doc in docs:
        tokens = _header(doc)
        for ctx in doc.contexts:
            tokens.extend(_with_markers(ctx.text, ctx.cited_ids, known))
        out.append(TrainingDocument(doc.id, tuple(tokens), CITING))
    return out


def build_cited_pseudo_fulltext(docs: Iterable[Document]) -> list[TrainingDocument]:
    """Cited orientation: title, abstract, then every context citing the document.

    In-link contexts are taken in (citing id, context index) order.  The
    document's own outgoing contexts are not used.
    """
    docs = list(docs)
    known = {d.id for d in docs}
    inlinks: dict[str, list[tuple[str, int, CitationContext]]] = defaultdict(list)
    for doc in docs:
        for i, ctx in enumerate(doc.contexts):
            for cid in ctx.cited_ids:
                if cid in known:
                    inlinks[cid].append((doc.id, i, ctx))
    out = []
    for doc in docs:
        tokens = _header(doc)
        for _, _, ctx in sorted(inlinks.get(doc.id, []), key=lambda x: (x[0], x[1])):
            tokens.extend(_with_markers(ctx.text, ctx.cited_ids, known))
        out.append(TrainingDocument(doc.id, tuple(tokens), CITED))
    return out


def strip_stopwords(docs: Iterable[TrainingDocument], stopwords: frozenset[str] | set[str]) -> list[TrainingDocument]:
    """Drop stop words from training text so it matches the query preprocessing.  Markers stay."""
    return [TrainingDocument(d.id, tuple(textproc.remove_stopwords(d.tokens, stopwords)), d.orientation) for d in docs]


# ---------------------------------------------------------------------------
# filtering and splitting


def citation_counts(docs: Iterable[Document]) -> Counter:
    """Number of distinct citing documents in ``docs`` for every cited id."""
    counts: Counter = Counter()
    for doc in docs:
        cited = set()
        for ctx in doc.contexts:
            cited.update(ctx.cited_ids)
        cited.discard(doc.id)
        counts.update(cited)
    return counts


def filter_min_citations(
    docs: Iterable[Document], min_citations: int, counts: Mapping[str, int] | None = None
) -> list[Document]:
    """Keep documents cited by at least ``min_citations`` documents.

    ``counts`` defaults to :func:`citation_counts` over ``docs``; pass the
    counts of the full corpus to filter repeatedly against a fixed reference.
    """
    if min_citations < 0:
        raise ValueError("min_citations must be >= 0")
    docs = list(docs)
    if min_citations == 0:
        return docs
    if counts is None:
        counts = citation_counts(docs)
    return [d for d in docs if counts.get(d.id, 0) >= min_citations]


def split_train_test(
    docs: Iterable[Document], train_years: tuple[int, int], test_years: tuple[int, int]
) -> tuple[list[Document], list[Document]]:
    """Partition by year.  Ranges are inclusive ``(first, last)`` pairs."""
    (a0, a1), (b0, b1) = train_years, test_years
    if a0 > a1:
        raise CorpusError(f"empty training year range {train_years}")
    if b0 > b1:
        raise CorpusError(f"empty test year range {test_years}")
    if a0 <= b1 and b0 <= a1:
        raise CorpusError(f"training years {train_years} overlap test years {test_years}")
    train, test = [], []
    for d in docs:
        if a0 <= d.year <= a1:
            train.append(d)
        elif b0 <= d.year <= b1:
            test.append(d)
    return train, test


def extract_test_queries(
    test_source: Iterable[Document],
    train_ids: Iterable[str],
    stopwords: frozenset[str] | set[str],
    min_words: int = MIN_QUERY_WORDS,
) -> list[TestQuery]:
    """One query per distinct context text of the test papers.

    Ground truth is restricted to ``train_ids``; contexts sharing the same
    text are merged and their ground truths unioned.  Queries whose
    ground truth ends up empty, or with fewer than ``min_words``
    non-stop-word tokens, are discarded.
    """
    train_ids = set(train_ids)
    if not train_ids:
        raise CorpusError("no training documents")
    grouped: dict[str, tuple[set[str], int]] = {}
    order: list[str] = []
    for doc in sorted(test_source, key=lambda d: d.id):
        for ctx in doc.contexts:
            key = " ".join(ctx.text.split())
            truth = {c for c in ctx.cited_ids if c in train_ids}
            if key not in grouped:
                grouped[key] = (set(), doc.year)
                order.append(key)
            gt, year = grouped[key]
            gt.update(truth)
            grouped[key] = (gt, min(year, doc.year))

    queries = []
    for key in order:
        gt, year = grouped[key]
        if not gt:
            continue
        toks = textproc.remove_stopwords(textproc.words(key), stopwords)
        if len(toks) < min_words:
            continue
        queries.append(TestQuery(f"q{len(queries):06d}", key, tuple(toks), frozenset(gt), year))
    return queries
