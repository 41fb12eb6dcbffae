import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from citerec import evaluation as ev
from citerec.corpus import TestQuery


class TestFixtures:
    def test_ap(self):
        assert ev.average_precision(["X", "a", "b"], {"X"}, 3) == 1.0
        # hits at ranks 1 and 3: (1/1 + 2/3) / 2
        assert ev.average_precision(["r1", "n", "r2"], {"r1", "r2"}, 3) == pytest.approx(5 / 6, abs=1e-12)
        assert ev.average_precision(["n1", "n2"], {"r"}, 2) == 0.0

    def test_ap_normalizer_caps_at_k(self):
        assert ev.average_precision(["a", "b"], {"a", "b", "c", "d"}, 2) == 1.0

    def test_recall(self):
        assert ev.recall_at_k(["A", "x", "y"], {"A", "B"}, 3) == 0.5
        assert ev.recall_at_k(["B", "A"], {"A", "B"}, 2) == 1.0

    def test_rr(self):
        assert ev.reciprocal_rank(["n", "n2", "hit"], {"hit"}, 10) == pytest.approx(1 / 3)
        assert ev.reciprocal_rank(["n"], {"hit"}, 10) == 0.0
        assert ev.reciprocal_rank(["n", "hit"], {"hit"}, 1) == 0.0

    def test_mrr_over_two_queries(self):
        rep = ev.aggregate("x", [ev.evaluate_query("q1", ["a", "b", "t"], {"t"}, [10]),
                                 ev.evaluate_query("q2", ["t"], {"t"}, [10])], [10])
        assert rep.value("mrr", 10) == pytest.approx((1 / 3 + 1) / 2, abs=1e-12)

    def test_ndcg(self):
        # DCG = 1 + 1/log2(3), IDCG = 1 + 1/log2(2) = 2
        assert ev.dcg([1, 0, 1]) == pytest.approx(1.6309297535714575, abs=1e-12)
        assert ev.ndcg_at_k(["r1", "n", "r2"], {"r1", "r2"}, 3) == pytest.approx(0.8154648767857288, abs=1e-6)
        assert ev.ndcg_at_k(["r1", "r2"], {"r1", "r2"}, 5) == 1.0
        assert ev.ndcg_at_k(["n"], {"r"}, 5) == 0.0

    def test_perfect_single_query(self):
        rep = ev.aggregate("x", [ev.evaluate_query("q", ["t", "u"], {"t"}, [1, 5, 10])], [1, 5, 10])
        assert all(v == 1.0 for k in rep.cutoffs for v in rep.aggregates[k].values())

    def test_empty_truth_rejected(self):
        for f in (ev.average_precision, ev.recall_at_k, ev.reciprocal_rank, ev.ndcg_at_k):
            with pytest.raises(ValueError):
                f(["a"], set(), 5)


def test_ap_equals_rr_for_single_relevant():
    rng = np.random.default_rng(99)
    for _ in range(1000):
        pool = [f"d{i}" for i in range(30)]
        ranked = list(rng.permutation(pool)[: rng.integers(0, 30)])
        truth = {pool[rng.integers(0, 30)]}
        k = int(rng.integers(1, 25))
        assert ev.average_precision(ranked, truth, k) == pytest.approx(ev.reciprocal_rank(ranked, truth, k), abs=1e-15)


pool = [f"d{i}" for i in range(10)]
ranked_st = st.lists(st.sampled_from(pool), unique=True, max_size=10)
truth_st = st.sets(st.sampled_from(pool), min_size=1)


@given(ranked_st, truth_st, st.integers(1, 11))
def test_bounds_and_monotonicity(ranked, truth, k):
    for name in ev.METRICS:
        v = ev._METRIC_FUNCS[name](ranked, truth, k)
        assert 0.0 <= v <= 1.0 + 1e-12
    assert ev.recall_at_k(ranked, truth, k + 1) >= ev.recall_at_k(ranked, truth, k)


@given(truth_st, st.integers(1, 11))
def test_ideal_ranking_ndcg_is_one(truth, k):
    ideal = sorted(truth) + [d for d in pool if d not in truth]
    assert ev.ndcg_at_k(ideal, truth, k) == pytest.approx(1.0, abs=1e-12)


def _queries():
    return [
        TestQuery("q0", "t", ("a",), frozenset({"A"}), 2017),
        TestQuery("q1", "t", ("b",), frozenset({"B", "C"}), 2017),
    ]


def test_run_evaluation_means_and_round_trip():
    ranks = {"q0": ["X", "A"], "q1": ["C", "Y", "B"]}
    rep = ev.run_evaluation(lambda q, depth: ranks[q.id][:depth], _queries(), [1, 3], "toy")
    assert rep.n == 2
    assert rep.value("recall", 1) == pytest.approx((0 + 0.5) / 2)
    assert rep.value("mrr", 3) == pytest.approx((0.5 + 1.0) / 2)
    back = ev.EvalReport.from_json(json.loads(rep.dumps()))
    assert back.dumps() == rep.dumps()


def test_zero_queries_is_an_error():
    with pytest.raises(ValueError):
        ev.run_evaluation(lambda q, d: [], [], [5])


def test_csv_and_curves():
    rep = ev.run_evaluation(lambda q, d: ["A"], _queries(), [5, 10], "bm25")
    lines = ev.comparison_csv([rep]).splitlines()
    assert lines[0] == "algorithm,cutoff,metric,value" and len(lines) == 1 + 2 * len(ev.METRICS)
    curves = ev.curve_table([rep]).splitlines()
    assert len(curves) == 1 + 2 * len(ev.METRICS) and curves[1].startswith("bm25 map 5 ")


def test_write_report(tmp_path):
    rep = ev.run_evaluation(lambda q, d: ["A"], _queries(), [5], "lda")
    path = ev.write_report(rep, tmp_path)
    assert path.name == "report_lda.json"
    data = json.loads(path.read_text())
    assert data["n"] == 2 and data["aggregates"]["5"]["recall"] == pytest.approx(0.5)
