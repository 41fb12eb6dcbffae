import json

import pytest

from citerec import bm25, cli, synthetic


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture
def prepared(tmp_path, fast_config):
    out = tmp_path / "out"
    assert run("prepare", "--config", fast_config, "--out-dir", out) == 0
    return out, fast_config


def test_prepare_counts_match_fixture(prepared):
    out, _ = prepared
    counts = json.loads((out / "manifest.json").read_text())["prepare"]["counts"]
    # 5 clusters x 34 training papers; 6 test papers per cluster citing 4 papers each
    assert counts["training_papers"] == 170
    assert counts["test_source_papers"] == 30
    assert counts["test_contexts"] == 120
    assert counts["loaded_documents"] == 200 and counts["rejected_lines"] == 0


def test_min_citations_zero_keeps_every_training_year_doc(prepared):
    out, _ = prepared
    n_lines = len((out / "prepared" / "train_citing.jsonl").read_text().splitlines())
    train_docs = [d for d in synthetic.generate(synthetic.BUNDLED_SPEC, 0).documents if 1991 <= d.year <= 2016]
    assert n_lines == len(train_docs)


def test_min_citations_flag_filters(tmp_path, fast_config):
    out = tmp_path / "o"
    assert run("prepare", "--config", fast_config, "--out-dir", out, "--min-citations", "4") == 0
    counts = json.loads((out / "manifest.json").read_text())["prepare"]["counts"]
    assert 0 < counts["training_papers"] < 170


def test_missing_corpus_exit_code(tmp_path, capsys):
    missing = tmp_path / "nope.jsonl"
    assert run("prepare", "--corpus", missing, "--out-dir", tmp_path / "o") == 2
    assert str(missing) in capsys.readouterr().err


def test_bad_config_exit_code(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"corpus": "x", "nonsense": 1}))
    assert run("prepare", "--config", cfg, "--out-dir", tmp_path / "o") == 2


def test_unknown_algorithm_is_usage_error(prepared):
    out, cfg = prepared
    with pytest.raises(SystemExit) as exc:
        run("train", "--algorithm", "word2vec", "--config", cfg, "--out-dir", out)
    assert exc.value.code == 2
    assert run("evaluate", "--algorithm", "magic", "--config", cfg, "--out-dir", out) == 2


def test_missing_model_exit_code(prepared, capsys):
    out, cfg = prepared
    assert run("recommend", "graph embeddings", "--algorithm", "bm25", "--config", cfg, "--out-dir", out) == 3
    assert "bm25_citing" in capsys.readouterr().err


def test_hybrid_names_the_missing_component(prepared, capsys):
    out, cfg = prepared
    assert run("train", "--algorithm", "bm25", "--config", cfg, "--out-dir", out) == 0
    capsys.readouterr()
    assert run("recommend", "some context", "--config", cfg, "--out-dir", out) == 3
    assert "hd2v_citing" in capsys.readouterr().err


def test_train_without_prepare(tmp_path, fast_config):
    assert run("train", "--algorithm", "bm25", "--config", fast_config, "--out-dir", tmp_path / "empty") == 3


def test_bm25_reload_has_identical_stats(prepared):
    out, cfg = prepared
    run("train", "--algorithm", "bm25", "--config", cfg, "--out-dir", out)
    log = json.loads((out / "models" / "bm25_citing.log.json").read_text())
    assert bm25.load_index(out / "models" / "bm25_citing.json").stats() == log["stats"]


def test_same_seed_gives_identical_models(tmp_path, fast_config):
    blobs = []
    for name in ("a", "b"):
        out = tmp_path / name
        run("prepare", "--config", fast_config, "--out-dir", out)
        for alg in ("hd2v", "lda"):
            assert run("train", "--algorithm", alg, "--config", fast_config, "--out-dir", out) == 0
        blobs.append([(out / "models" / f).read_bytes() for f in ("hd2v_citing.bin", "lda_citing.bin")])
    assert blobs[0] == blobs[1]
    run("train", "--algorithm", "hd2v", "--config", fast_config, "--out-dir", tmp_path / "a", "--seed", "5")
    assert (tmp_path / "a" / "models" / "hd2v_citing.bin").read_bytes() != blobs[1][0]


def test_recommend_and_evaluate(prepared, capsys):
    out, cfg = prepared
    for alg in ("bm25", "hd2v"):
        assert run("train", "--algorithm", alg, "--config", cfg, "--out-dir", out) == 0
    capsys.readouterr()
    args = ("--config", cfg, "--out-dir", out)
    assert run("recommend", "p0x000c1 p0x000c2 clu0w3", "--format", "json", "--k", "3", *args) == 0
    first = capsys.readouterr().out
    result = json.loads(first)
    assert result["source"] == "hybrid" and len(result["entries"]) == 3
    assert run("recommend", "p0x000c1 p0x000c2 clu0w3", "--format", "json", "--k", "3", *args) == 0
    assert capsys.readouterr().out == first

    assert run("evaluate", "--algorithm", "bm25,hd2vout", "--algorithm", "hybrid", "--cutoffs", "5,10", *args) == 0
    reports = out / "reports"
    assert sorted(p.name for p in reports.glob("report_*.json")) == [
        "report_bm25.json", "report_hd2vout.json", "report_hybrid.json"]
    curves = [l for l in (reports / "curves.dat").read_text().splitlines() if not l.startswith("#")]
    assert len(curves) == 3 * 4 * 2
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["evaluate"]["queries"] == 120
    assert set(manifest["evaluate"]["artifacts"]) >= {"reports/comparison.csv", "reports/curves.dat"}


def test_cited_orientation_labels(prepared):
    out, cfg = prepared
    args = ("--config", cfg, "--out-dir", out)
    assert run("train", "--algorithm", "bm25", "--orientation", "cited", *args) == 0
    assert run("evaluate", "--algorithm", "bm25:cited", "--cutoffs", "10", *args) == 0
    assert (out / "reports" / "report_bm25_cited.json").exists()


def test_flags_override_config(tmp_path, fast_config):
    args = cli.build_parser().parse_args(["evaluate", "--config", str(fast_config), "--seed", "9", "--cutoffs", "3,1"])
    cfg = cli.load_config(args)
    assert cfg.seed == 9 and cfg.cutoffs == (1, 3)
    assert cfg.train_config("hd2v").rng_seed == 9 + cli.SEED_OFFSETS["hd2v"]
    assert cfg.train_config("hd2v").dim == 16
    assert cfg.fusion_config().rng_seed == 9 + cli.SEED_OFFSETS["fusion"]
