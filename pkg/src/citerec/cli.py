"""Command-line pipeline: prepare, train, recommend, evaluate.

Every artifact lands under ``--out-dir``::

    prepared/train_citing.jsonl   prepared/train_cited.jsonl
    prepared/test_queries.jsonl   models/<algorithm>_<orientation>.*
    reports/report_<label>.json   reports/comparison.csv   reports/curves.dat
    manifest.json

Exit codes: 0 success, 1 internal error, 2 bad configuration or input,
3 missing artifact.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

from . import bm25, corpus, embed, evaluation, lda, textproc
from .corpus import CITED, CITING
from .hybrid import FusionConfig
from .recommenders import Bm25Ranker, EmbeddingRanker, Hybrid12Ranker, Hybrid23Ranker, LdaRanker, ids_for

logger = logging.getLogger("citerec")

EXIT_OK, EXIT_INTERNAL, EXIT_CONFIG, EXIT_MISSING = 0, 1, 2, 3

TRAINABLE = ("bm25", "hd2v", "doc2vec", "lda")
RECOMMENDERS = ("bm25", "hd2vout", "hd2vinout", "doc2vec", "lda", "hybrid", "hybrid23")
ORIENTATIONS = (corpus.CITING, corpus.CITED)

# offsets added to the global seed, one per seeded component
SEED_OFFSETS = {"hd2v": 101, "doc2vec": 202, "lda": 303, "lda_infer": 404, "fusion": 505}


class ConfigError(Exception):
    pass


class MissingArtifact(Exception):
    pass


@dataclass
class PipelineConfig:
    corpus: str | None = None
    out_dir: str = "citerec-out"
    train_years: tuple[int, int] = (1991, 2016)
    test_years: tuple[int, int] = (2017, 2017)
    min_citations: int = 0
    stopwords: str | None = None
    seed: int = 0
    orientation: str = CITING
    k: int = 10
    cutoffs: tuple[int, ...] = evaluation.DEFAULT_CUTOFFS
    bm25: dict = field(default_factory=dict)
    hd2v: dict = field(default_factory=dict)
    doc2vec: dict = field(default_factory=dict)
    lda: dict = field(default_factory=dict)
    fusion: dict = field(default_factory=dict)

    # -- derived component configs

    def bm25_params(self) -> bm25.Bm25Params:
        return bm25.Bm25Params(**self.bm25)

    def train_config(self, algorithm: str) -> embed.TrainConfig:
        opts = dict(self.hd2v if algorithm == "hd2v" else self.doc2vec)
        opts["rng_seed"] = self.seed + SEED_OFFSETS[algorithm]
        return embed.TrainConfig(**opts)

    def fusion_config(self) -> FusionConfig:
        opts = {"k": hybrid_k(self.fusion), "n": self.fusion.get("n", FusionConfig.n)}
        return FusionConfig(rng_seed=self.seed + SEED_OFFSETS["fusion"], **opts)

    @property
    def out(self) -> Path:
        return Path(self.out_dir)


def hybrid_k(opts: dict) -> int:
    return int(opts.get("k", FusionConfig.k))


def _year_range(text: str) -> tuple[int, int]:
    parts = str(text).split("-")
    try:
        if len(parts) == 1:
            y = int(parts[0])
            return (y, y)
        if len(parts) == 2:
            return (int(parts[0]), int(parts[1]))
    except ValueError:
        pass
    raise ConfigError(f"bad year range {text!r} (expected YYYY or YYYY-YYYY)")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        vals = tuple(sorted({int(x) for x in str(text).split(",") if x.strip()}))
    except ValueError:
        raise ConfigError(f"bad integer list {text!r}") from None
    if not vals or min(vals) < 1:
        raise ConfigError(f"cutoffs must be positive integers, got {text!r}")
    return vals


def load_config(args: argparse.Namespace) -> PipelineConfig:
    """Defaults, then the ``--config`` JSON file, then command-line flags."""
    cfg = PipelineConfig()
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        known = {f.name for f in fields(PipelineConfig)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for key in ("train_years", "test_years"):
            if key in data:
                v = data[key]
                data[key] = _year_range(v) if isinstance(v, str) else tuple(v)
        if "cutoffs" in data:
            data["cutoffs"] = _int_list(",".join(map(str, data["cutoffs"])))
        cfg = replace(cfg, **data)

    overrides = {}
    for flag, key, conv in [
        ("corpus", "corpus", str),
        ("out_dir", "out_dir", str),
        ("train_years", "train_years", _year_range),
        ("test_years", "test_years", _year_range),
        ("min_citations", "min_citations", int),
        ("stopwords", "stopwords", str),
        ("seed", "seed", int),
        ("orientation", "orientation", str),
        ("k", "k", int),
        ("cutoffs", "cutoffs", _int_list),
    ]:
        val = getattr(args, flag, None)
        if val is not None:
            overrides[key] = conv(val)
    cfg = replace(cfg, **overrides)

    if cfg.orientation not in ORIENTATIONS:
        raise ConfigError(f"orientation must be one of {ORIENTATIONS}")
    if cfg.min_citations < 0:
        raise ConfigError("min_citations must be >= 0")
    if cfg.k < 1:
        raise ConfigError("k must be >= 1")
    if cfg.stopwords and not Path(cfg.stopwords).is_file():
        raise ConfigError(f"stop-word file not found: {cfg.stopwords}")
    try:
        cfg.bm25_params()
        cfg.train_config("hd2v")
        cfg.train_config("doc2vec")
        cfg.fusion_config()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid component configuration: {exc}") from exc
    return cfg


# ---------------------------------------------------------------------------
# manifest


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _update_manifest(cfg: PipelineConfig, section: str, payload: dict) -> None:
    path = cfg.out / "manifest.json"
    manifest = json.loads(path.read_text(encoding="utf-8")) if path.exists() else {}
    manifest[section] = payload
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _artifact_entry(cfg: PipelineConfig, paths: Sequence[Path]) -> dict:
    return {str(p.relative_to(cfg.out)): _sha256(p) for p in paths}


# ---------------------------------------------------------------------------
# prepare


def _stopwords(cfg: PipelineConfig) -> frozenset[str]:
    return textproc.load_stopwords(cfg.stopwords)


def cmd_prepare(cfg: PipelineConfig) -> dict:
    if not cfg.corpus:
        raise ConfigError("no corpus given (use --corpus or the 'corpus' config key)")
    path = Path(cfg.corpus)
    if not path.is_file():
        raise ConfigError(f"corpus file not found: {path}")
    try:
        report = corpus.load_corpus(path)
        train, test = corpus.split_train_test(report.documents, cfg.train_years, cfg.test_years)
    except corpus.CorpusError as exc:
        raise ConfigError(str(exc)) from exc
    # citation counts come from the whole loaded corpus so the threshold does not shift while filtering
    counts = corpus.citation_counts(report.documents)
    train = corpus.filter_min_citations(train, cfg.min_citations, counts)
    if not train:
        raise ConfigError("no training documents survive the year split and citation filter")
    stop = _stopwords(cfg)
    queries = corpus.extract_test_queries(test, {d.id for d in train}, stop)

    prep = cfg.out / "prepared"
    prep.mkdir(parents=True, exist_ok=True)
    paths = {
        "citing": prep / "train_citing.jsonl",
        "cited": prep / "train_cited.jsonl",
        "queries": prep / "test_queries.jsonl",
    }
    corpus.save_training_docs(corpus.strip_stopwords(corpus.build_pseudo_fulltext(train), stop), paths["citing"])
    corpus.save_training_docs(corpus.strip_stopwords(corpus.build_cited_pseudo_fulltext(train), stop), paths["cited"])
    corpus.save_queries(queries, paths["queries"])
    counts_out = {
        "loaded_documents": len(report.documents),
        "rejected_lines": len(report.rejected),
        "dropped_contexts": report.dropped_contexts,
        "dangling_ids": len(report.dangling_ids),
        "training_papers": len(train),
        "test_source_papers": len(test),
        "test_contexts": len(queries),
    }
    _update_manifest(cfg, "prepare", {
        "corpus": str(path),
        "train_years": list(cfg.train_years),
        "test_years": list(cfg.test_years),
        "min_citations": cfg.min_citations,
        "counts": counts_out,
        "artifacts": _artifact_entry(cfg, list(paths.values())),
    })
    logger.info("prepared %d training papers and %d test contexts", len(train), len(queries))
    return counts_out


# ---------------------------------------------------------------------------
# train


def _model_path(cfg: PipelineConfig, algorithm: str, orientation: str) -> Path:
    ext = {"bm25": "json", "hd2v": "bin", "doc2vec": "bin", "lda": "bin"}[algorithm]
    return cfg.out / "models" / f"{algorithm}_{orientation}.{ext}"


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise MissingArtifact(f"missing artifact {path} ({hint})")
    return path


def _training_docs(cfg: PipelineConfig, orientation: str) -> list[corpus.TrainingDocument]:
    path = _require(cfg.out / "prepared" / f"train_{orientation}.jsonl", "run 'citerec prepare' first")
    return corpus.load_training_docs(path)


def cmd_train(cfg: PipelineConfig, algorithm: str) -> Path:
    if algorithm not in TRAINABLE:
        raise ConfigError(f"unknown algorithm {algorithm!r}; choose from {', '.join(TRAINABLE)}")
    docs = _training_docs(cfg, cfg.orientation)
    path = _model_path(cfg, algorithm, cfg.orientation)
    path.parent.mkdir(parents=True, exist_ok=True)
    if algorithm == "bm25":
        index = bm25.build_index(docs)
        bm25.save_index(index, path)
        echo = {"params": asdict(cfg.bm25_params()), "stats": index.stats()}
    elif algorithm in ("hd2v", "doc2vec"):
        tc = cfg.train_config(algorithm)
        trainer = embed.train_hd2v if algorithm == "hd2v" else embed.train_doc2vec
        try:
            space = trainer(docs, tc)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        embed.save_space(space, path)
        echo = {"config": asdict(tc), "vocab_size": len(space.words), "doc_count": len(space.doc_ids)}
    else:
        opts = dict(cfg.lda)
        opts.setdefault("num_topics", lda.DEFAULT_TOPICS)
        opts.setdefault("iterations", lda.DEFAULT_SWEEPS)
        seed = cfg.seed + SEED_OFFSETS["lda"]
        model = lda.train_lda(docs, seed=seed, **opts)
        lda.save_lda(model, path)
        echo = {"config": {**opts, "alpha": model.alpha, "beta": model.beta, "seed": seed}}
    log = path.with_suffix(".log.json")
    log.write_text(json.dumps({"algorithm": algorithm, "orientation": cfg.orientation, "seed": cfg.seed, **echo},
                              indent=1, sort_keys=True) + "\n", encoding="utf-8")
    _update_manifest(cfg, f"train:{algorithm}:{cfg.orientation}", {"artifacts": _artifact_entry(cfg, [path, log])})
    logger.info("trained %s on the %s corpus -> %s", algorithm, cfg.orientation, path)
    return path


# ---------------------------------------------------------------------------
# recommend / evaluate


def _parse_algorithm(name: str, default_orientation: str) -> tuple[str, str]:
    alg, _, orient = name.partition(":")
    alg = alg.lower()
    orient = orient or default_orientation
    if alg not in RECOMMENDERS:
        raise ConfigError(f"unknown algorithm {alg!r}; choose from {', '.join(RECOMMENDERS)}")
    if orient not in ORIENTATIONS:
        raise ConfigError(f"unknown orientation {orient!r}")
    return alg, orient


def label_for(alg: str, orient: str) -> str:
    if alg in ("hybrid", "hybrid23") or orient == corpus.CITING:
        return alg
    return f"{alg}_{orient}"


def build_ranker(cfg: PipelineConfig, alg: str, orient: str):
    def bm(o):
        p = _require(_model_path(cfg, "bm25", o), f"run 'citerec train --algorithm bm25 --orientation {o}'")
        return Bm25Ranker(bm25.load_index(p), cfg.bm25_params(), source=label_for("bm25", o))

    def emb(kind, o, mode):
        p = _require(_model_path(cfg, kind, o), f"run 'citerec train --algorithm {kind} --orientation {o}'")
        label = "doc2vec" if kind == "doc2vec" else "hd2v" + mode.lower()
        return EmbeddingRanker(embed.load_space(p), mode, source=label_for(label, o))

    if alg == "bm25":
        return bm(orient)
    if alg == "hd2vout":
        return emb("hd2v", orient, embed.OUT)
    if alg == "hd2vinout":
        return emb("hd2v", orient, embed.INOUT)
    if alg == "doc2vec":
        return emb("doc2vec", orient, embed.IN)
    if alg == "lda":
        p = _require(_model_path(cfg, "lda", orient), f"run 'citerec train --algorithm lda --orientation {orient}'")
        return LdaRanker(lda.load_lda(p), seed=cfg.seed + SEED_OFFSETS["lda_infer"], source=label_for("lda", orient))
    if alg == "hybrid":
        return Hybrid12Ranker(bm(corpus.CITING), emb("hd2v", corpus.CITING, embed.OUT), cfg.fusion_config())
    return Hybrid23Ranker(
        emb("hd2v", corpus.CITED, embed.OUT), bm(corpus.CITED), bm(corpus.CITING), cfg.fusion_config()
    )


def query_tokens(text: str, stopwords: frozenset[str]) -> list[str]:
    return textproc.remove_stopwords(textproc.words(text), stopwords)


def cmd_recommend(cfg: PipelineConfig, context: str, algorithm: str) -> dict:
    alg, orient = _parse_algorithm(algorithm, cfg.orientation)
    ranker = build_ranker(cfg, alg, orient)
    result = ranker(query_tokens(context, _stopwords(cfg)), cfg.k)
    out = result.to_json()
    out["entries"] = out["entries"][: cfg.k]
    return out


def cmd_evaluate(cfg: PipelineConfig, algorithms: Sequence[str]) -> list[evaluation.EvalReport]:
    if not algorithms:
        raise ConfigError("no algorithms to evaluate")
    qpath = _require(cfg.out / "prepared" / "test_queries.jsonl", "run 'citerec prepare' first")
    queries = corpus.load_queries(qpath)
    if not queries:
        raise ConfigError("the prepared test set has no queries")
    parsed = [_parse_algorithm(a, cfg.orientation) for a in algorithms]
    rankers = [(label_for(a, o), build_ranker(cfg, a, o)) for a, o in parsed]
    out = cfg.out / "reports"
    out.mkdir(parents=True, exist_ok=True)
    reports, written = [], []
    for label, ranker in rankers:
        rep = evaluation.run_evaluation(ids_for(ranker), queries, cfg.cutoffs, label)
        reports.append(rep)
        written.append(evaluation.write_report(rep, out))
        logger.info("%s: %s", label, ", ".join(f"{m}@{k}={rep.value(m, k):.4f}" for k in rep.cutoffs for m in evaluation.METRICS))
    comparison = out / "comparison.csv"
    comparison.write_text(evaluation.comparison_csv(reports), encoding="utf-8")
    curves = out / "curves.dat"
    curves.write_text(evaluation.curve_table(reports), encoding="utf-8")
    written += [comparison, curves]
    _update_manifest(cfg, "evaluate", {
        "algorithms": [r.algorithm for r in reports],
        "cutoffs": list(cfg.cutoffs),
        "queries": len(queries),
        "artifacts": _artifact_entry(cfg, written),
    })
    return reports


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--out-dir", dest="out_dir", help="output directory (default: citerec-out)")
    common.add_argument("--seed", type=int, help="global seed")
    common.add_argument("--orientation", choices=ORIENTATIONS, help="training corpus orientation (default: citing)")
    common.add_argument("--stopwords", help="stop-word file (default: bundled list)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="citerec", description="Context-aware citation recommendation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", parents=[common], help="build training corpora and test queries")
    p.add_argument("--corpus", help="corpus JSONL file")
    p.add_argument("--train-years", dest="train_years", help="e.g. 1991-2016")
    p.add_argument("--test-years", dest="test_years", help="e.g. 2017 or 2018-2019")
    p.add_argument("--min-citations", dest="min_citations", type=int)

    p = sub.add_parser("train", parents=[common], help="train one component")
    p.add_argument("--algorithm", required=True, choices=TRAINABLE)

    p = sub.add_parser("recommend", parents=[common], help="recommend papers for one citation context")
    p.add_argument("context", help="citation context text")
    p.add_argument("--algorithm", default="hybrid", help=f"one of {', '.join(RECOMMENDERS)}, optionally ':cited'")
    p.add_argument("--k", type=int, help="number of recommendations (default 10)")
    p.add_argument("--format", choices=("table", "json"), default="table")

    p = sub.add_parser("evaluate", parents=[common], help="evaluate algorithms on the prepared test set")
    p.add_argument("--algorithm", dest="algorithms", action="append", default=[],
                   help="repeatable; a comma-separated list also works")
    p.add_argument("--cutoffs", help="comma-separated cutoffs (default 5,10)")
    return parser


def _print_table(result: dict) -> None:
    print(f"# {result['source']}")
    for rank, (doc_id, value) in enumerate(result["entries"], 1):
        print(f"{rank:>3}  {doc_id}  {value}")


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        if args.command == "prepare":
            counts = cmd_prepare(cfg)
            print(json.dumps(counts, indent=1, sort_keys=True))
        elif args.command == "train":
            print(cmd_train(cfg, args.algorithm))
        elif args.command == "recommend":
            result = cmd_recommend(cfg, args.context, args.algorithm)
            if args.format == "json":
                print(json.dumps(result, sort_keys=True))
            else:
                _print_table(result)
        elif args.command == "evaluate":
            algs = [a for item in args.algorithms for a in item.split(",") if a.strip()]
            for rep in cmd_evaluate(cfg, algs or ["hybrid"]):
                for alg, k, m, v in rep.rows():
                    print(f"{alg}\t{m}@{k}\t{v:.4f}")
    except ConfigError as exc:
        print(f"citerec: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingArtifact as exc:
        print(f"citerec: error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except Exception as exc:  # noqa: BLE001
        logger.exception("internal error")
        print(f"citerec: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
