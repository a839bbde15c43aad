"""Retrieval pipelines: end-to-end search and pseudo-relevance feedback.

Three entry points share one shape: gather candidate documents through
the coarse quantizer, score them exactly, sort descending with ties by
ascending doc id.

* ``colbert_e2e``: probe with the query embeddings, score with maxsim.
* ``prf_rerank``: run e2e, cluster the embeddings of its top feedback
  documents, map each centroid to its most likely token, keep the
  highest-IDF centroids as expansion embeddings, and rescore the same
  candidate set with the expansion bonus added.
* ``prf_rank``: as prf_rerank, but the candidate set is regenerated by
  probing with the original and the expansion embeddings together, so
  documents matching only the expansion can enter the ranking.

All pipelines are stateless over an immutable index; per-query
clustering seeds derive from (global seed, query id), so queries are
reproducible individually and independent of batch order.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import accel
from .cluster import kmeans
from .errors import ConfigError, DimensionError
from .index import IndexedCorpus, gather_ranges, top_rows_by_dot
from .scoring import score_candidates


@dataclass
class QueryEmbeddings:
    query_id: str
    rows: np.ndarray  # (m, dim) float

    def __post_init__(self) -> None:
        self.rows = np.ascontiguousarray(self.rows, dtype=np.float64)
        if self.rows.ndim != 2 or len(self.rows) < 1:
            raise DimensionError(
                f"query {self.query_id}: embeddings must be a non-empty 2-d array"
            )


@dataclass
class RankedList:
    query_id: str
    doc_ids: np.ndarray  # (n,) int64, best first
    scores: np.ndarray  # (n,) float64, non-increasing

    def __len__(self) -> int:
        return len(self.doc_ids)

    def __iter__(self) -> Iterator[tuple[int, float]]:
        return zip((int(d) for d in self.doc_ids), (float(s) for s in self.scores))

    def top(self, k: int) -> "RankedList":
        return RankedList(self.query_id, self.doc_ids[:k], self.scores[:k])


@dataclass
class FeedbackBag:
    embeddings: np.ndarray  # (n, dim) float64
    source_doc_ids: np.ndarray  # (f_b,) int64


@dataclass
class Centroid:
    vector: np.ndarray  # (dim,) float64
    mapped_token: int
    importance: float  # IDF of the mapped token, >= 0


@dataclass
class ExpansionSet:
    elements: list[Centroid]

    def __len__(self) -> int:
        return len(self.elements)

    def vectors(self) -> np.ndarray:
        if not self.elements:
            return np.empty((0, 0), dtype=np.float64)
        return np.stack([c.vector for c in self.elements])

    def weights(self) -> np.ndarray:
        return np.array([c.importance for c in self.elements], dtype=np.float64)


@dataclass
class PrfConfig:
    feedback_docs: int = 3
    clusters: int = 24
    expansion_size: int = 10
    beta: float = 1.0
    token_neighbors: int = 8
    k_prime: int = 1000
    nprobe: int = 8
    seed: int = 0
    stoplist: frozenset[int] = field(default_factory=frozenset)

    def validate(self) -> None:
        for name, value in (
            ("feedback_docs", self.feedback_docs),
            ("clusters", self.clusters),
            ("token_neighbors", self.token_neighbors),
            ("k_prime", self.k_prime),
            ("nprobe", self.nprobe),
        ):
            if value < 1:
                raise ConfigError(f"{name} must be >= 1, got {value}")
        # expansion_size 0 is the documented switch-off (reduces to e2e)
        if self.expansion_size < 0:
            raise ConfigError(f"expansion_size must be >= 0, got {self.expansion_size}")
        if self.expansion_size > self.clusters:
            raise ConfigError(
                f"expansion_size {self.expansion_size} exceeds cluster count {self.clusters}"
            )
        if self.beta < 0:
            raise ConfigError(f"beta must be >= 0, got {self.beta}")


def query_kmeans_seed(global_seed: int, query_id: str) -> int:
    """Stable per-query clustering seed, independent across queries."""
    digest = hashlib.sha256(f"{global_seed}|{query_id}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _candidate_union(index: IndexedCorpus, rows: np.ndarray, k_prime: int, nprobe: int) -> np.ndarray:
    hits = [index.ann_docs(row, k_prime, nprobe) for row in rows]
    if not hits:
        return np.empty(0, dtype=np.int64)
    return np.unique(np.concatenate(hits))


def _gather_candidates(
    index: IndexedCorpus, candidates: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pack candidate docs' embeddings into one matrix plus segment layout."""
    starts = index.doc_offsets[candidates, 0]
    lengths = index.doc_offsets[candidates, 1]
    rows, out_starts = gather_ranges(starts, lengths)
    return np.ascontiguousarray(index.embeddings[rows]), out_starts, lengths


def _ranked(query_id: str, candidates: np.ndarray, scores: np.ndarray) -> RankedList:
    order = np.lexsort((candidates, -scores))
    return RankedList(query_id, candidates[order], scores[order])


def colbert_e2e(
    q: QueryEmbeddings, index: IndexedCorpus, k_prime: int = 1000, nprobe: int = 8
) -> RankedList:
    """Candidate union over per-embedding ANN probes, scored with maxsim."""
    if index.doc_count == 0:
        return RankedList(q.query_id, np.empty(0, np.int64), np.empty(0, np.float64))
    candidates = _candidate_union(index, q.rows, k_prime, nprobe)
    if len(candidates) == 0:
        return RankedList(q.query_id, np.empty(0, np.int64), np.empty(0, np.float64))
    flat, starts, lengths = _gather_candidates(index, candidates)
    scores = score_candidates(q.rows, flat, starts, lengths)
    return _ranked(q.query_id, candidates, scores)


def collect_feedback(ranking: RankedList, f_b: int, index: IndexedCorpus) -> FeedbackBag:
    """All stored embeddings of the top min(f_b, |ranking|) documents."""
    if len(ranking) == 0:
        raise ConfigError("cannot collect feedback from an empty ranking")
    if f_b < 1:
        raise ConfigError(f"feedback depth must be >= 1, got {f_b}")
    top_docs = ranking.doc_ids[: min(f_b, len(ranking))]
    parts = [index.doc_embeddings(int(d)).astype(np.float64) for d in top_docs]
    return FeedbackBag(np.concatenate(parts), np.asarray(top_docs, dtype=np.int64))


def token_likelihood(v: np.ndarray, r: int, index: IndexedCorpus) -> dict[int, float]:
    """Distribution over token ids among the r nearest stored embeddings."""
    if index.embedding_count == 0:
        raise ConfigError("cannot look up tokens in an empty index")
    tokens = index.ann_tokens(v, r)
    return _distribution(tokens)


def _distribution(tokens: np.ndarray) -> dict[int, float]:
    uniq, counts = np.unique(tokens, return_counts=True)
    total = counts.sum()
    return {int(t): float(c) / float(total) for t, c in zip(uniq, counts)}


def _map_token(dist: dict[int, float], stoplist: frozenset[int]) -> int:
    """Most likely token id, ties by ascending id; stoplisted ids skipped
    unless that would leave nothing to map to."""
    items = [(t, p) for t, p in dist.items() if t not in stoplist] or list(dist.items())
    items.sort(key=lambda tp: (-tp[1], tp[0]))
    return items[0][0]


def select_expansion(
    centroids: np.ndarray,
    f_e: int,
    r: int,
    index: IndexedCorpus,
    stoplist: frozenset[int] = frozenset(),
) -> ExpansionSet:
    """Map each centroid to its most likely token, keep the f_e highest-IDF.

    Token mapping ties break by ascending token id; IDF ties between
    centroids break by centroid index. f_e may not exceed the number of
    centroids supplied.
    """
    centroids = np.ascontiguousarray(centroids, dtype=np.float64)
    n_cent = len(centroids)
    if f_e > n_cent:
        raise ConfigError(f"cannot select {f_e} expansion embeddings from {n_cent} centroids")
    if f_e == 0:
        return ExpansionSet([])
    dots = index.dense_store() @ centroids.T  # one pass for all centroids
    mapped: list[Centroid] = []
    for i in range(n_cent):
        rows = top_rows_by_dot(dots[:, i], r)
        dist = _distribution(index.token_ids[rows])
        token = _map_token(dist, stoplist)
        mapped.append(Centroid(centroids[i], token, index.idf(token)))
    sigma = np.array([c.importance for c in mapped])
    order = np.lexsort((np.arange(n_cent), -sigma))[:f_e]
    return ExpansionSet([mapped[i] for i in order])


def build_expansion(
    q: QueryEmbeddings, ranking: RankedList, index: IndexedCorpus, cfg: PrfConfig
) -> ExpansionSet:
    """Feedback bag -> clusters -> token-mapped, IDF-ranked expansion."""
    if cfg.expansion_size == 0 or len(ranking) == 0:
        return ExpansionSet([])
    bag = collect_feedback(ranking, cfg.feedback_docs, index)
    seed = query_kmeans_seed(cfg.seed, q.query_id)
    result = kmeans(bag.embeddings, cfg.clusters, seed=seed)
    return select_expansion(
        result.centroids, cfg.expansion_size, cfg.token_neighbors, index, cfg.stoplist
    )


def _add_expansion_bonus(
    base_scores: np.ndarray,
    expansion: ExpansionSet,
    beta: float,
    flat: np.ndarray,
    starts: np.ndarray,
    lengths: np.ndarray,
) -> np.ndarray:
    if beta == 0 or len(expansion) == 0:
        return base_scores
    per_row = accel.maxsim_segments_rows(expansion.vectors(), flat, starts, lengths)
    return base_scores + beta * (per_row * expansion.weights()[:, None]).sum(axis=0)


def prf_rerank(q: QueryEmbeddings, index: IndexedCorpus, cfg: PrfConfig) -> RankedList:
    """Rescore the e2e candidate set with the expansion bonus added.

    The candidate document set is exactly the e2e one; only scores and
    order change. beta=0 or expansion_size=0 reproduces e2e bit for bit.
    """
    cfg.validate()
    base = colbert_e2e(q, index, cfg.k_prime, cfg.nprobe)
    if len(base) == 0:
        return base
    expansion = build_expansion(q, base, index, cfg)
    if cfg.beta == 0 or len(expansion) == 0:
        return base
    flat, starts, lengths = _gather_candidates(index, base.doc_ids)
    scores = _add_expansion_bonus(base.scores, expansion, cfg.beta, flat, starts, lengths)
    return _ranked(q.query_id, base.doc_ids, scores)


def prf_rank(q: QueryEmbeddings, index: IndexedCorpus, cfg: PrfConfig) -> RankedList:
    """Re-probe with original and expansion embeddings, then rescore.

    The regenerated candidate set always contains the e2e one, since the
    original query embeddings are probed with identical parameters.
    """
    cfg.validate()
    base = colbert_e2e(q, index, cfg.k_prime, cfg.nprobe)
    if len(base) == 0:
        return base
    expansion = build_expansion(q, base, index, cfg)
    if len(expansion) == 0:
        return base
    probes = np.concatenate([q.rows, expansion.vectors()])
    candidates = _candidate_union(index, probes, cfg.k_prime, cfg.nprobe)
    flat, starts, lengths = _gather_candidates(index, candidates)
    scores = score_candidates(q.rows, flat, starts, lengths)
    scores = _add_expansion_bonus(scores, expansion, cfg.beta, flat, starts, lengths)
    return _ranked(q.query_id, candidates, scores)
