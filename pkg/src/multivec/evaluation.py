"""TREC-style evaluation: file IO, ranking metrics, significance tests.

Qrels lines are `qid 0 docno grade`; run lines are
`qid Q0 docno rank score tag`. Metrics: MAP and Recall at depth 1000,
NDCG and reciprocal rank at depth 10. Binary relevance uses an
auto-detected grade threshold: >= 2 when the qrels carry any grade >= 2
(graded judgments where grade 1 means "related but not relevant"),
else >= 1. NDCG uses raw grades, not the binarized ones.

Significance: two-sided paired t-test per comparison, Holm step-down
adjustment across a family of comparisons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import ConfigError, FormatError

DEFAULT_RANK_DEPTH = 1000
DEFAULT_TOP_DEPTH = 10

Qrels = dict[str, dict[str, int]]
Run = dict[str, list[tuple[str, float]]]  # docno, score; best first


def read_qrels(path) -> Qrels:
    qrels: Qrels = {}
    for lineno, parts in _read_columns(path, 4, "qrels"):
        qid, _, docno, grade_s = parts
        try:
            grade = int(grade_s)
        except ValueError:
            raise FormatError(f"qrels line {lineno}: grade {grade_s!r} is not an integer")
        if grade < 0:
            raise FormatError(f"qrels line {lineno}: negative grade {grade}")
        by_doc = qrels.setdefault(qid, {})
        if docno in by_doc:
            raise FormatError(f"qrels line {lineno}: duplicate judgment for ({qid}, {docno})")
        by_doc[docno] = grade
    return qrels


def read_run(path) -> Run:
    raw: dict[str, list[tuple[int, str, float]]] = {}
    for lineno, parts in _read_columns(path, 6, "run"):
        qid, _, docno, rank_s, score_s, _tag = parts
        try:
            rank = int(rank_s)
            score = float(score_s)
        except ValueError:
            raise FormatError(f"run line {lineno}: bad rank/score {rank_s!r} {score_s!r}")
        raw.setdefault(qid, []).append((rank, docno, score))

    run: Run = {}
    for qid, rows in raw.items():
        rows.sort(key=lambda r: r[0])
        ranks = [r[0] for r in rows]
        if ranks != list(range(1, len(rows) + 1)):
            raise FormatError(f"run query {qid}: ranks are not contiguous from 1")
        scores = [r[2] for r in rows]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise FormatError(f"run query {qid}: scores increase with rank")
        run[qid] = [(docno, score) for _, docno, score in rows]
    return run


def write_run(path, run: Run, tag: str) -> None:
    """Emit a run file: queries sorted by id, ranks contiguous from 1."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for qid in sorted(run):
            for rank, (docno, score) in enumerate(run[qid], start=1):
                fh.write(f"{qid} Q0 {docno} {rank} {score:.6f} {tag}\n")


def _read_columns(path, n_cols: int, kind: str):
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != n_cols:
            raise FormatError(f"{kind} line {lineno}: expected {n_cols} fields, got {len(parts)}")
        yield lineno, parts


def binarization_threshold(qrels: Qrels) -> int:
    """>=2 when any judgment is graded past 1, else >=1."""
    for by_doc in qrels.values():
        for grade in by_doc.values():
            if grade >= 2:
                return 2
    return 1


@dataclass
class MetricReport:
    name: str
    per_query: dict[str, float]
    mean: float
    excluded: list[str] = field(default_factory=list)  # judged, but metric undefined
    unjudged: list[str] = field(default_factory=list)  # run queries absent from qrels


def _report(name: str, per_query: dict[str, float], excluded, unjudged) -> MetricReport:
    mean = float(np.mean(list(per_query.values()))) if per_query else 0.0
    return MetricReport(name, per_query, mean, sorted(excluded), sorted(unjudged))


def _split_queries(run: Run, qrels: Qrels) -> tuple[list[str], list[str]]:
    judged = [qid for qid in run if qid in qrels]
    unjudged = [qid for qid in run if qid not in qrels]
    return judged, unjudged


def map_at(run: Run, qrels: Qrels, k: int = DEFAULT_RANK_DEPTH, threshold: int | None = None) -> MetricReport:
    """Average precision at depth k; denominator is all relevant docs."""
    threshold = threshold if threshold is not None else binarization_threshold(qrels)
    judged, unjudged = _split_queries(run, qrels)
    per_query: dict[str, float] = {}
    excluded = []
    for qid in judged:
        relevant = {d for d, g in qrels[qid].items() if g >= threshold}
        if not relevant:
            excluded.append(qid)
            continue
        hits = 0
        precision_sum = 0.0
        for rank, (docno, _) in enumerate(run[qid][:k], start=1):
            if docno in relevant:
                hits += 1
                precision_sum += hits / rank
        per_query[qid] = precision_sum / len(relevant)
    return _report(f"MAP@{k}", per_query, excluded, unjudged)


def recall_at(run: Run, qrels: Qrels, k: int = DEFAULT_RANK_DEPTH, threshold: int | None = None) -> MetricReport:
    threshold = threshold if threshold is not None else binarization_threshold(qrels)
    judged, unjudged = _split_queries(run, qrels)
    per_query: dict[str, float] = {}
    excluded = []
    for qid in judged:
        relevant = {d for d, g in qrels[qid].items() if g >= threshold}
        if not relevant:
            excluded.append(qid)
            continue
        found = sum(1 for docno, _ in run[qid][:k] if docno in relevant)
        per_query[qid] = found / len(relevant)
    return _report(f"Recall@{k}", per_query, excluded, unjudged)


def mrr_at(run: Run, qrels: Qrels, k: int = DEFAULT_TOP_DEPTH, threshold: int | None = None) -> MetricReport:
    threshold = threshold if threshold is not None else binarization_threshold(qrels)
    judged, unjudged = _split_queries(run, qrels)
    per_query: dict[str, float] = {}
    excluded = []
    for qid in judged:
        relevant = {d for d, g in qrels[qid].items() if g >= threshold}
        if not relevant:
            excluded.append(qid)
            continue
        rr = 0.0
        for rank, (docno, _) in enumerate(run[qid][:k], start=1):
            if docno in relevant:
                rr = 1.0 / rank
                break
        per_query[qid] = rr
    return _report(f"MRR@{k}", per_query, excluded, unjudged)


def ndcg_at(run: Run, qrels: Qrels, k: int = DEFAULT_TOP_DEPTH, gain: str = "linear") -> MetricReport:
    """Discounted gain at depth k against the ideal ordering of all judged
    docs; gains stay graded (binarization does not apply here)."""
    if gain not in ("linear", "exp"):
        raise ConfigError(f"gain must be 'linear' or 'exp', got {gain!r}")
    judged, unjudged = _split_queries(run, qrels)
    per_query: dict[str, float] = {}
    excluded = []
    for qid in judged:
        grades = qrels[qid]
        dcg = 0.0
        for rank, (docno, _) in enumerate(run[qid][:k], start=1):
            g = _gain(grades.get(docno, 0), gain)
            dcg += g / math.log2(rank + 1)
        ideal = sorted(grades.values(), reverse=True)[:k]
        idcg = sum(_gain(g, gain) / math.log2(rank + 1) for rank, g in enumerate(ideal, start=1))
        if idcg == 0:
            excluded.append(qid)
            continue
        per_query[qid] = dcg / idcg
    return _report(f"NDCG@{k}", per_query, excluded, unjudged)


def _gain(grade: int, mode: str) -> float:
    return float(grade) if mode == "linear" else float(2**grade - 1)


@dataclass
class TTestResult:
    t: float
    p: float
    n: int
    mean_diff: float
    degenerate: bool = False  # zero-variance differences with unequal means


def paired_ttest(a, b) -> TTestResult:
    """Two-sided paired t-test on per-query values (paired by position)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ConfigError("paired samples must be 1-d arrays of equal length")
    n = len(a)
    if n < 2:
        raise ConfigError(f"need at least 2 paired values, got {n}")
    diff = a - b
    mean = float(diff.mean())
    sd = float(diff.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(t=0.0, p=1.0, n=n, mean_diff=0.0)
        return TTestResult(
            t=math.copysign(math.inf, mean), p=0.0, n=n, mean_diff=mean, degenerate=True
        )
    t = mean / (sd / math.sqrt(n))
    p = 2.0 * float(stats.t.sf(abs(t), df=n - 1))
    return TTestResult(t=t, p=min(1.0, p), n=n, mean_diff=mean)


def holm_bonferroni(pvalues, alpha: float = 0.05) -> tuple[np.ndarray, np.ndarray]:
    """Step-down adjusted p-values and strict-alpha rejection flags.

    adjusted_(i) = max over j <= i of min(1, (m-j+1) * p_(j)) in ascending
    p order, reported back in input order.
    """
    p = np.asarray(pvalues, dtype=np.float64)
    if p.ndim != 1 or len(p) == 0:
        raise ConfigError("need a non-empty 1-d array of p-values")
    if np.any((p < 0) | (p > 1)):
        raise ConfigError("p-values must lie in [0, 1]")
    m = len(p)
    order = np.argsort(p, kind="stable")
    scaled = np.minimum(1.0, (m - np.arange(m)) * p[order])
    stepped = np.maximum.accumulate(scaled)
    adjusted = np.empty(m, dtype=np.float64)
    adjusted[order] = stepped
    return adjusted, adjusted < alpha


@dataclass
class Comparison:
    label: str
    ttest: TTestResult
    adjusted_p: float
    reject: bool


def paired_ttest_holm(pairs, alpha: float = 0.05, labels=None) -> list[Comparison]:
    """Paired t-tests for a family of comparisons, Holm-adjusted together.

    pairs: sequence of (per_query_a, per_query_b); the family size is
    len(pairs). Degenerate zero-variance comparisons keep p=0 and are
    flagged on the underlying test result.
    """
    pairs = list(pairs)
    if not pairs:
        raise ConfigError("need at least one comparison")
    labels = list(labels) if labels is not None else [str(i) for i in range(len(pairs))]
    if len(labels) != len(pairs):
        raise ConfigError(f"{len(labels)} labels for {len(pairs)} comparisons")
    tests = [paired_ttest(a, b) for a, b in pairs]
    adjusted, reject = holm_bonferroni([t.p for t in tests], alpha)
    return [
        Comparison(label, test, float(adj), bool(rej))
        for label, test, adj, rej in zip(labels, tests, adjusted, reject)
    ]


def evaluate_run(
    run: Run,
    qrels: Qrels,
    rank_depth: int = DEFAULT_RANK_DEPTH,
    top_depth: int = DEFAULT_TOP_DEPTH,
    threshold: int | None = None,
    gain: str = "linear",
) -> dict[str, MetricReport]:
    """The standard four-metric report for one run."""
    return {
        "MAP": map_at(run, qrels, rank_depth, threshold),
        "NDCG@10": ndcg_at(run, qrels, top_depth, gain),
        "MRR@10": mrr_at(run, qrels, top_depth, threshold),
        "Recall": recall_at(run, qrels, rank_depth, threshold),
    }
