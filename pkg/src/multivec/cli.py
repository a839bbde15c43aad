"""Command-line surface: synth, index, search, eval, sweep.

Errors derived from MultivecError print one line to stderr in the form
``error:<category>: <message>`` and exit nonzero, so scripts can branch
on the category without parsing prose.

Reported response times cover retrieval only; query embeddings are
precomputed inputs here, so no encoding cost is included.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, MultivecError
from .evaluation import (
    binarization_threshold,
    evaluate_run,
    paired_ttest_holm,
    read_qrels,
    read_run,
    write_run,
)
from .formats import read_cmve, read_id_map
from .index import IndexBuildConfig, build_index, load_index, save_index
from .pipeline import PrfConfig, QueryEmbeddings, colbert_e2e, prf_rank, prf_rerank
from .synth import SynthSpec, gen_corpus

MODES = ("e2e", "prf-rerank", "prf-rank")
METRIC_ORDER = ("MAP", "NDCG@10", "MRR@10", "Recall")
SWEEP_PARAMS = {
    "fb": ("feedback_docs", int),
    "k": ("clusters", int),
    "fe": ("expansion_size", int),
    "beta": ("beta", float),
    "r": ("token_neighbors", int),
    "kprime": ("k_prime", int),
    "nprobe": ("nprobe", int),
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MultivecError as exc:
        print(f"error:{exc.category}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error:io-error: {exc}", file=sys.stderr)
        return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multivec",
        description="Multi-vector retrieval engine with feedback-based query expansion.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a planted-topic corpus, queries, and qrels")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--topics", type=int, default=8)
    p.add_argument("--docs-per-topic", type=int, default=50)
    p.add_argument("--tokens-per-doc", type=int, default=24)
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--queries-per-topic", type=int, default=2)
    p.add_argument("--noise", type=float, default=0.35)
    p.add_argument("--vocab", type=int, default=4096)
    p.add_argument("--mask-rows", type=int, default=24)
    p.add_argument("--stopwords", type=int, default=4)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("index", help="build an index directory from a corpus file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--docnos", help="TSV mapping internal doc id to external docno")
    p.add_argument("--out", required=True)
    p.add_argument("--cells", type=int)
    p.add_argument("--sample-rate", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--force", action="store_true", help="overwrite an existing index")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("search", help="run queries against an index, write a run file")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--qids", help="TSV mapping internal query id to query id string")
    p.add_argument("--mode", choices=MODES, default="e2e")
    p.add_argument("--out", required=True)
    p.add_argument("--depth", type=int, default=1000, help="run file depth per query")
    p.add_argument("--tag", help="run tag (default: mode plus config hash)")
    _add_prf_flags(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("eval", help="evaluate a run file against qrels")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--rank-depth", type=int, default=1000)
    p.add_argument("--top-depth", type=int, default=10)
    p.add_argument("--threshold", type=int, help="override the binarization grade threshold")
    p.add_argument("--gain", choices=("linear", "exp"), default="linear")
    p.add_argument("--per-query", action="store_true")
    p.add_argument("--format", choices=("table", "csv"), default="table")
    p.add_argument("--baseline", help="second run file for paired significance tests")
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="grid over one tunable; CSV of metrics per value")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--qids")
    p.add_argument("--qrels", required=True)
    p.add_argument("--mode", choices=MODES, default="prf-rerank")
    p.add_argument("--param", choices=sorted(SWEEP_PARAMS), required=True)
    p.add_argument("--values", required=True, help="comma-separated grid values")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--depth", type=int, default=1000)
    p.add_argument(
        "--no-timing",
        action="store_true",
        help="write MRT as 0 so repeated sweeps are byte-identical",
    )
    _add_prf_flags(p)
    p.set_defaults(func=cmd_sweep)

    return parser


def _add_prf_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--fb", type=int, default=3, help="feedback documents")
    p.add_argument("--k", type=int, default=24, help="clusters over the feedback bag")
    p.add_argument("--fe", type=int, default=10, help="expansion embeddings kept")
    p.add_argument("--beta", type=float, default=1.0, help="expansion score weight")
    p.add_argument("--r", type=int, default=8, help="token-lookup neighbors")
    p.add_argument("--kprime", type=int, default=1000, help="ANN depth per probe embedding")
    p.add_argument("--nprobe", type=int, default=8, help="coarse cells scanned per probe")
    p.add_argument("--seed", type=int, default=0, help="clustering seed")
    p.add_argument("--stoplist", help="comma-separated token ids excluded from expansion mapping")


def _prf_config(args) -> PrfConfig:
    stoplist: frozenset[int] = frozenset()
    if getattr(args, "stoplist", None):
        try:
            stoplist = frozenset(int(v) for v in args.stoplist.split(",") if v.strip())
        except ValueError:
            raise ConfigError(f"stoplist must be comma-separated integers, got {args.stoplist!r}")
    cfg = PrfConfig(
        feedback_docs=args.fb,
        clusters=args.k,
        expansion_size=args.fe,
        beta=args.beta,
        token_neighbors=args.r,
        k_prime=args.kprime,
        nprobe=args.nprobe,
        seed=args.seed,
        stoplist=stoplist,
    )
    cfg.validate()
    return cfg


def _config_tag(mode: str, cfg: PrfConfig) -> str:
    canon = json.dumps(
        {
            "fb": cfg.feedback_docs,
            "k": cfg.clusters,
            "fe": cfg.expansion_size,
            "beta": cfg.beta,
            "r": cfg.token_neighbors,
            "kprime": cfg.k_prime,
            "nprobe": cfg.nprobe,
            "seed": cfg.seed,
            "stoplist": sorted(cfg.stoplist),
        },
        sort_keys=True,
    )
    return f"{mode}-{hashlib.sha256(canon.encode()).hexdigest()[:8]}"


def _load_queries(queries_path, qids_path) -> list[QueryEmbeddings]:
    dim, records = read_cmve(queries_path)
    del dim
    qid_map = read_id_map(qids_path) if qids_path else {}
    return [QueryEmbeddings(qid_map.get(r.doc_id, str(r.doc_id)), r.embeddings) for r in records]


def run_search(index, queries, mode: str, cfg: PrfConfig, depth: int):
    """Run every query; returns (run dict, mean per-query milliseconds)."""
    if mode not in MODES:
        raise ConfigError(f"unknown search mode {mode!r}")
    run = {}
    elapsed = 0.0
    for q in queries:
        t0 = time.perf_counter()
        if mode == "e2e":
            ranked = colbert_e2e(q, index, cfg.k_prime, cfg.nprobe)
        elif mode == "prf-rerank":
            ranked = prf_rerank(q, index, cfg)
        else:
            ranked = prf_rank(q, index, cfg)
        elapsed += time.perf_counter() - t0
        top = ranked.top(depth)
        run[q.query_id] = [(index.docnos[d], s) for d, s in top]
    mrt_ms = (elapsed / len(queries)) * 1000.0 if queries else 0.0
    return run, mrt_ms


def cmd_synth(args) -> int:
    spec = SynthSpec(
        seed=args.seed,
        n_topics=args.topics,
        docs_per_topic=args.docs_per_topic,
        tokens_per_doc=args.tokens_per_doc,
        dim=args.dim,
        queries_per_topic=args.queries_per_topic,
        noise=args.noise,
        vocab_size=args.vocab,
        mask_rows=args.mask_rows,
        stopword_tokens=args.stopwords,
    )
    paths = gen_corpus(spec, args.out)
    print(f"docs: {spec.doc_count}  queries: {spec.query_count}  dim: {spec.dim}")
    for name in ("corpus", "docnos", "queries", "qids", "qrels"):
        print(f"{name}: {paths[name]}")
    return 0


def cmd_index(args) -> int:
    out = Path(args.out)
    if (out / "meta.json").exists() and not args.force:
        raise ConfigError(f"index directory {out} exists; pass --force to overwrite")
    dim, records = read_cmve(args.corpus)
    docnos = read_id_map(args.docnos) if args.docnos else None
    config = IndexBuildConfig(cells=args.cells, sample_rate=args.sample_rate, seed=args.seed)
    index = build_index(records, docnos, config)
    save_index(index, out)
    print(
        f"docs: {index.doc_count}  embeddings: {index.embedding_count}  "
        f"dim: {dim}  cells: {index.quantizer.n_cells}  out: {out}"
    )
    return 0


def cmd_search(args) -> int:
    index = load_index(args.index)
    queries = _load_queries(args.queries, args.qids)
    for q in queries:
        if q.rows.shape[1] != index.dim:
            raise FormatError(
                f"query {q.query_id} has dimension {q.rows.shape[1]}, index has {index.dim}"
            )
    cfg = _prf_config(args)
    run, mrt_ms = run_search(index, queries, args.mode, cfg, args.depth)
    tag = args.tag or _config_tag(args.mode, cfg)
    write_run(args.out, run, tag)
    print(f"queries: {len(queries)}  MRT_ms: {mrt_ms:.3f}  run: {args.out}")
    return 0


def _format_mean_row(name: str, report) -> str:
    return (
        f"{name:<10} {report.mean:8.4f}  "
        f"queries={len(report.per_query)} excluded={len(report.excluded)} "
        f"unjudged={len(report.unjudged)}"
    )


def cmd_eval(args) -> int:
    run = read_run(args.run)
    qrels = read_qrels(args.qrels)
    threshold = args.threshold if args.threshold is not None else binarization_threshold(qrels)
    reports = evaluate_run(run, qrels, args.rank_depth, args.top_depth, threshold, args.gain)

    if args.format == "csv":
        print("metric,mean,queries,excluded,unjudged")
        for name in METRIC_ORDER:
            rep = reports[name]
            print(
                f"{name},{rep.mean:.6f},{len(rep.per_query)},"
                f"{len(rep.excluded)},{len(rep.unjudged)}"
            )
    else:
        print(f"binarization threshold: grade >= {threshold}")
        for name in METRIC_ORDER:
            print(_format_mean_row(name, reports[name]))

    if args.per_query:
        print("qid," + ",".join(METRIC_ORDER))
        qids = sorted({q for name in METRIC_ORDER for q in reports[name].per_query})
        for qid in qids:
            cells = [
                f"{reports[name].per_query[qid]:.6f}" if qid in reports[name].per_query else ""
                for name in METRIC_ORDER
            ]
            print(f"{qid}," + ",".join(cells))

    if args.baseline:
        base_run = read_run(args.baseline)
        base_reports = evaluate_run(base_run, qrels, args.rank_depth, args.top_depth, threshold, args.gain)
        pairs = []
        labels = []
        for name in METRIC_ORDER:
            common = sorted(
                set(reports[name].per_query) & set(base_reports[name].per_query)
            )
            if len(common) < 2:
                continue
            a = np.array([reports[name].per_query[q] for q in common])
            b = np.array([base_reports[name].per_query[q] for q in common])
            pairs.append((a, b))
            labels.append(name)
        if not pairs:
            raise ConfigError("not enough overlapping evaluated queries for significance tests")
        comparisons = paired_ttest_holm(pairs, alpha=args.alpha, labels=labels)
        print(f"paired t-test vs {args.baseline} (Holm-adjusted, alpha={args.alpha})")
        print("metric,mean,baseline_mean,diff,t,p,adjusted_p,significant")
        for comp in comparisons:
            rep = reports[comp.label]
            base = base_reports[comp.label]
            tt = comp.ttest
            flag = "yes" if comp.reject else "no"
            if tt.degenerate:
                flag += " (degenerate)"
            print(
                f"{comp.label},{rep.mean:.6f},{base.mean:.6f},{tt.mean_diff:+.6f},"
                f"{tt.t:.4f},{tt.p:.6f},{comp.adjusted_p:.6f},{flag}"
            )
    return 0


def cmd_sweep(args) -> int:
    field, caster = SWEEP_PARAMS[args.param]
    try:
        values = [caster(v.strip()) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"could not parse grid values {args.values!r} as {caster.__name__}")
    if not values:
        raise ConfigError("sweep grid is empty")

    index = load_index(args.index)
    queries = _load_queries(args.queries, args.qids)
    qrels = read_qrels(args.qrels)
    base_cfg = _prf_config(args)

    rows = []
    for value in values:
        overrides = {field: value}
        # a cluster-count grid point below the configured expansion size
        # shrinks the expansion to keep the selection well defined
        if field == "clusters" and base_cfg.expansion_size > value:
            overrides["expansion_size"] = value
        cfg = PrfConfig(
            **{
                **{
                    "feedback_docs": base_cfg.feedback_docs,
                    "clusters": base_cfg.clusters,
                    "expansion_size": base_cfg.expansion_size,
                    "beta": base_cfg.beta,
                    "token_neighbors": base_cfg.token_neighbors,
                    "k_prime": base_cfg.k_prime,
                    "nprobe": base_cfg.nprobe,
                    "seed": base_cfg.seed,
                    "stoplist": base_cfg.stoplist,
                },
                **overrides,
            }
        )
        cfg.validate()
        run, mrt_ms = run_search(index, queries, args.mode, cfg, args.depth)
        reports = evaluate_run(run, qrels)
        if args.no_timing:
            mrt_ms = 0.0
        rows.append(
            (
                value,
                reports["MAP"].mean,
                reports["NDCG@10"].mean,
                reports["MRR@10"].mean,
                reports["Recall"].mean,
                mrt_ms,
            )
        )

    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{args.param},MAP,NDCG@10,MRR@10,Recall,MRT_ms\n")
        for value, map_v, ndcg_v, mrr_v, recall_v, mrt in rows:
            fh.write(f"{value},{map_v:.6f},{ndcg_v:.6f},{mrr_v:.6f},{recall_v:.6f},{mrt:.3f}\n")
    print(f"points: {len(rows)}  csv: {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
