"""Offline evaluation: MAP, Recall@k, MRR and NDCG with binary relevance."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Collection, Iterable, Sequence

from .corpus import TestQuery

METRICS = ("map", "recall", "mrr", "ndcg")
DEFAULT_CUTOFFS = (5, 10)


def _check(truth: Collection[str], k: int) -> None:
    if not truth:
        raise ValueError("ground truth is empty")
    if k < 1:
        raise ValueError("cutoff must be >= 1")


def average_precision(ranked: Sequence[str], truth: Collection[str], k: int) -> float:
    """Sum of precision at each hit within the top ``k``, over min(|truth|, k)."""
    _check(truth, k)
    hits = 0
    total = 0.0
    for r, doc_id in enumerate(ranked[:k], 1):
        if doc_id in truth:
            hits += 1
            total += hits / r
    return total / min(len(truth), k)


def recall_at_k(ranked: Sequence[str], truth: Collection[str], k: int) -> float:
    _check(truth, k)
    return len(set(ranked[:k]) & set(truth)) / len(truth)


def reciprocal_rank(ranked: Sequence[str], truth: Collection[str], k: int) -> float:
    _check(truth, k)
    for r, doc_id in enumerate(ranked[:k], 1):
        if doc_id in truth:
            return 1.0 / r
    return 0.0


def dcg(relevance: Sequence[float]) -> float:
    # rank 1 is undiscounted, rank i >= 2 is divided by log2(i)
    return sum(rel if i == 1 else rel / math.log2(i) for i, rel in enumerate(relevance, 1))


def ndcg_at_k(ranked: Sequence[str], truth: Collection[str], k: int) -> float:
    _check(truth, k)
    gains = [1.0 if d in truth else 0.0 for d in ranked[:k]]
    ideal = dcg([1.0] * min(len(truth), k))
    return dcg(gains) / ideal


_METRIC_FUNCS = {
    "map": average_precision,
    "recall": recall_at_k,
    "mrr": reciprocal_rank,
    "ndcg": ndcg_at_k,
}


@dataclass
class QueryResult:
    query_id: str
    ranked: list[str]
    ground_truth: list[str]
    values: dict[int, dict[str, float]]

    def to_json(self) -> dict:
        return {
            "query_id": self.query_id,
            "ranked": self.ranked,
            "ground_truth": self.ground_truth,
            "values": {str(k): v for k, v in sorted(self.values.items())},
        }

    @classmethod
    def from_json(cls, obj) -> "QueryResult":
        return cls(
            obj["query_id"],
            list(obj["ranked"]),
            list(obj["ground_truth"]),
            {int(k): dict(v) for k, v in obj["values"].items()},
        )


def evaluate_query(query_id: str, ranked: Sequence[str], truth: Collection[str], cutoffs: Iterable[int]) -> QueryResult:
    values = {k: {m: f(ranked, truth, k) for m, f in _METRIC_FUNCS.items()} for k in sorted(set(cutoffs))}
    return QueryResult(query_id, list(ranked[: max(values)]), sorted(truth), values)


@dataclass
class EvalReport:
    algorithm: str
    cutoffs: list[int]
    queries: list[QueryResult] = field(default_factory=list)
    aggregates: dict[int, dict[str, float]] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.queries)

    def value(self, metric: str, k: int) -> float:
        return self.aggregates[k][metric]

    def to_json(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "n": self.n,
            "cutoffs": self.cutoffs,
            "aggregates": {str(k): v for k, v in sorted(self.aggregates.items())},
            "queries": [q.to_json() for q in self.queries],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1)

    def rows(self) -> list[tuple[str, int, str, float]]:
        """(algorithm, cutoff, metric, value) rows, cutoff-major."""
        return [(self.algorithm, k, m, self.aggregates[k][m]) for k in self.cutoffs for m in METRICS]

    @classmethod
    def from_json(cls, obj) -> "EvalReport":
        """Rebuild a report from its JSON form, recomputing aggregates from the per-query rows."""
        return aggregate(obj["algorithm"], [QueryResult.from_json(q) for q in obj["queries"]], obj["cutoffs"])


def aggregate(algorithm: str, results: list[QueryResult], cutoffs: Iterable[int]) -> EvalReport:
    cutoffs = sorted(set(cutoffs))
    if not results:
        raise ValueError("no queries to aggregate")
    n = len(results)
    aggregates = {
        k: {m: math.fsum(r.values[k][m] for r in results) / n for m in METRICS} for k in cutoffs
    }
    return EvalReport(algorithm, cutoffs, results, aggregates)


Recommender = Callable[[TestQuery, int], Sequence[str]]


def run_evaluation(
    recommender: Recommender,
    test_queries: Sequence[TestQuery],
    cutoffs: Iterable[int] = DEFAULT_CUTOFFS,
    algorithm: str = "",
) -> EvalReport:
    """Evaluate ``recommender(query, depth) -> ranked ids`` on every query."""
    cutoffs = sorted(set(cutoffs))
    if not cutoffs:
        raise ValueError("at least one cutoff is required")
    if not test_queries:
        raise ValueError("no test queries survived preparation")
    depth = max(cutoffs)
    results = [
        evaluate_query(q.id, list(recommender(q, depth)), q.ground_truth, cutoffs) for q in test_queries
    ]
    return aggregate(algorithm, results, cutoffs)


def comparison_csv(reports: Iterable[EvalReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["algorithm", "cutoff", "metric", "value"])
    for rep in reports:
        for alg, k, m, v in rep.rows():
            w.writerow([alg, k, m, repr(v)])
    return buf.getvalue()


def curve_table(reports: Iterable[EvalReport]) -> str:
    """Whitespace-separated metric-vs-k table, one row per (algorithm, metric, cutoff)."""
    lines = ["# algorithm metric k value"]
    for rep in reports:
        for m in METRICS:
            for k in rep.cutoffs:
                lines.append(f"{rep.algorithm} {m} {k} {rep.aggregates[k][m]!r}")
    return "\n".join(lines) + "\n"


def write_report(report: EvalReport, out_dir: str | Path) -> Path:
    path = Path(out_dir) / f"report_{report.algorithm}.json"
    path.write_text(report.dumps(), encoding="utf-8")
    return path
