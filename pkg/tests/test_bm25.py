import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from citerec import bm25, textproc
from citerec.corpus import TrainingDocument


def tdocs(spec: dict[str, list[str]]) -> list[TrainingDocument]:
    return [TrainingDocument(i, tuple(toks), "citing") for i, toks in spec.items()]


def oracle_scores(spec, query, k1=1.2, b=0.75):
    """Closed-form Okapi BM25 straight from the raw token lists, no index."""
    n = len(spec)
    avgdl = sum(len(t) for t in spec.values()) / n
    out = {}
    for d, toks in spec.items():
        tf = Counter(toks)
        s = 0.0
        for q in query:
            if tf[q] == 0:
                continue
            df = sum(1 for t in spec.values() if q in t)
            idf = math.log((n - df + 0.5) / (df + 0.5) + 1.0)
            s += idf * tf[q] * (k1 + 1) / (tf[q] + k1 * (1 - b + b * len(toks) / avgdl))
        out[d] = s
    return out


WORKED = {"d1": ["cat", "sat", "mat"], "d2": ["dog", "sat", "log"], "d3": ["cat", "cat", "dog"]}


class TestWorkedExample:
    def test_scores(self):
        idx = bm25.build_index(tdocs(WORKED))
        p = bm25.Bm25Params()
        # ln(1.6) and ln(1.6) * 2 * 2.2 / 3.2, evaluated by hand
        assert bm25.score(idx, p, ["cat"], "d1") == pytest.approx(0.4700036292457356, abs=1e-12)
        assert bm25.score(idx, p, ["cat"], "d3") == pytest.approx(0.6462549902128864, abs=1e-12)
        assert bm25.score(idx, p, ["cat"], "d2") == 0.0

    def test_ranking(self):
        idx = bm25.build_index(tdocs(WORKED))
        assert bm25.top_k(idx, bm25.Bm25Params(), ["cat"]).ids == ["d3", "d1"]


def test_single_doc_postings():
    idx = bm25.build_index(tdocs({"d": ["a", "a", "b"]}))
    assert idx.postings == {"a": [("d", 2)], "b": [("d", 1)]}
    assert idx.avg_doc_length == 3 and idx.doc_count == 1


def test_markers_count_toward_length():
    m = textproc.marker("x")
    idx = bm25.build_index(tdocs({"d": ["a", m], "x": ["b"]}))
    assert idx.doc_lengths["d"] == 2 and idx.doc_frequencies[m] == 1


def test_stats_match_brute_force():
    rng = np.random.default_rng(7)
    spec = {f"d{i:02d}": [f"w{j}" for j in rng.integers(0, 15, rng.integers(1, 12))] for i in range(20)}
    idx = bm25.build_index(tdocs(spec))
    vocab = {t for toks in spec.values() for t in toks}
    assert idx.doc_count == 20
    assert idx.avg_doc_length == pytest.approx(sum(map(len, spec.values())) / 20)
    assert idx.doc_frequencies == {t: sum(t in toks for toks in spec.values()) for t in vocab}
    for t in vocab:
        assert dict(idx.postings[t]) == {d: toks.count(t) for d, toks in spec.items() if t in toks}


def test_errors():
    with pytest.raises(ValueError):
        bm25.build_index([])
    idx = bm25.build_index(tdocs(WORKED))
    with pytest.raises(KeyError):
        bm25.score(idx, bm25.Bm25Params(), ["cat"], "missing")
    with pytest.raises(ValueError):
        bm25.Bm25Params(b=1.5)


def test_no_indexed_terms_gives_empty_list():
    idx = bm25.build_index(tdocs(WORKED))
    assert bm25.top_k(idx, bm25.Bm25Params(), ["zebra"]).entries == []


def test_default_depth():
    assert bm25.DEFAULT_K == 500


def test_b_zero_ignores_length():
    spec = {"short": ["x"], "long": ["x"] + ["pad"] * 30, "other": ["y"]}
    idx = bm25.build_index(tdocs(spec))
    p = bm25.Bm25Params(b=0.0)
    assert bm25.score(idx, p, ["x"], "short") == bm25.score(idx, p, ["x"], "long")


def random_corpus(rng, max_docs=50, vocab=25):
    n = int(rng.integers(1, max_docs + 1))
    return {f"d{i:03d}": [f"t{j}" for j in rng.integers(0, vocab, rng.integers(1, 20))] for i in range(n)}


def test_top_k_matches_exhaustive_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        spec = random_corpus(rng)
        query = [f"t{j}" for j in rng.integers(0, 30, rng.integers(1, 6))]
        idx = bm25.build_index(tdocs(spec))
        p = bm25.Bm25Params()
        want = oracle_scores(spec, query)
        ranked = sorted((d for d, s in want.items() if s > 0), key=lambda d: (-want[d], d))
        got = bm25.top_k(idx, p, query, k=len(spec))
        assert got.ids == ranked
        for d, s in got.entries:
            assert abs(s - want[d]) <= 1e-9
        for d in spec:
            assert abs(bm25.score(idx, p, query, d) - want[d]) <= 1e-9


words = st.sampled_from(["a", "b", "c", "d", "e", "f"])
corpus_st = st.lists(st.lists(words, min_size=1, max_size=8), min_size=1, max_size=8)


@given(corpus_st, st.lists(words, min_size=1, max_size=6), st.randoms(use_true_random=False))
def test_query_order_is_irrelevant(docs, query, rnd):
    idx = bm25.build_index(tdocs({f"d{i}": t for i, t in enumerate(docs)}))
    shuffled = list(query)
    rnd.shuffle(shuffled)
    p = bm25.Bm25Params()
    for d in idx.doc_lengths:
        assert bm25.score(idx, p, query, d) == pytest.approx(bm25.score(idx, p, shuffled, d), abs=1e-12)


@given(corpus_st, words, st.data())
def test_extra_occurrence_never_lowers_score(docs, term, data):
    target = data.draw(st.integers(0, len(docs) - 1))
    before = {f"d{i}": t for i, t in enumerate(docs)}
    after = dict(before)
    after[f"d{target}"] = before[f"d{target}"] + [term]
    p = bm25.Bm25Params(b=0.0)
    s0 = bm25.score(bm25.build_index(tdocs(before)), p, [term], f"d{target}")
    s1 = bm25.score(bm25.build_index(tdocs(after)), p, [term], f"d{target}")
    assert s1 >= s0


@settings(max_examples=30)
@given(corpus_st, st.lists(words, min_size=1, max_size=4))
def test_full_depth_equals_sorted_scores(docs, query):
    spec = {f"d{i}": t for i, t in enumerate(docs)}
    idx = bm25.build_index(tdocs(spec))
    p = bm25.Bm25Params()
    all_scores = {d: bm25.score(idx, p, query, d) for d in spec}
    expect = sorted((d for d in spec if all_scores[d] > 0), key=lambda d: (-all_scores[d], d))
    got = bm25.top_k(idx, p, query, k=len(spec))
    assert got.ids == expect
    scores = [s for _, s in got.entries]
    assert scores == sorted(scores, reverse=True)


def test_persistence_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    idx = bm25.build_index(tdocs(random_corpus(rng)))
    bm25.save_index(idx, tmp_path / "i.json")
    back = bm25.load_index(tmp_path / "i.json")
    assert back == idx and back.stats() == idx.stats()
    bm25.save_index(back, tmp_path / "j.json")
    assert (tmp_path / "i.json").read_bytes() == (tmp_path / "j.json").read_bytes()
