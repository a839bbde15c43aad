"""Shared fixtures and independent reference implementations.

The reference ("oracle") functions here deliberately avoid the package's
production kernels: they loop per query row and per document so the
optimized paths have something independent to be compared against.
"""

from __future__ import annotations

import numpy as np
import pytest

from multivec import DocRecord, IndexBuildConfig, build_index
from multivec.synth import SynthSpec, gen_corpus


def maxsim_oracle(query: np.ndarray, doc: np.ndarray) -> float:
    """Row-at-a-time late-interaction score; no shared kernel code."""
    total = 0.0
    for row in np.asarray(query, dtype=np.float64):
        best = -np.inf
        for drow in np.asarray(doc, dtype=np.float64):
            best = max(best, float(np.dot(row, drow)))
        total += best
    return total


def rank_all_docs_oracle(query: np.ndarray, doc_matrices: list[np.ndarray]):
    """Exhaustive ranking of every document, ties by ascending doc id."""
    scored = [(i, maxsim_oracle(query, doc)) for i, doc in enumerate(doc_matrices)]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored


def nearest_embeddings_oracle(store: np.ndarray, v: np.ndarray, r: int):
    """Top-r rows by dot product, ties by ascending row index."""
    dots = [float(np.dot(row.astype(np.float64), v)) for row in store]
    order = sorted(range(len(dots)), key=lambda i: (-dots[i], i))
    return order[: min(r, len(dots))]


def best_doc_rank_oracle(store, emb_doc_ids, n_docs, v, k):
    """Per-doc best embedding dot product, top-k docs, ties ascending id."""
    best = {}
    for row, doc in zip(store, emb_doc_ids):
        dot = float(np.dot(row.astype(np.float64), np.asarray(v, dtype=np.float64)))
        if doc not in best or dot > best[doc]:
            best[int(doc)] = dot
    ranked = sorted(best, key=lambda d: (-best[d], d))
    return ranked[:k]


def make_records(rng: np.random.Generator, n_docs: int, tokens_per_doc: int, dim: int,
                 vocab: int = 100) -> list[DocRecord]:
    records = []
    for i in range(n_docs):
        tokens = rng.integers(0, vocab, size=tokens_per_doc).astype(np.uint32)
        emb = rng.standard_normal((tokens_per_doc, dim)).astype(np.float32)
        records.append(DocRecord(i, tokens, emb))
    return records


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_index(rng):
    """25 random docs, 6 tokens each, dim 16, exact-search friendly."""
    records = make_records(rng, n_docs=25, tokens_per_doc=6, dim=16)
    return build_index(records, config=IndexBuildConfig(cells=4, seed=9)), records


@pytest.fixture(scope="session")
def synth_corpus(tmp_path_factory):
    """One shared mid-size planted-topic corpus for pipeline-level tests."""
    out = tmp_path_factory.mktemp("synth")
    spec = SynthSpec(
        seed=11,
        n_topics=6,
        docs_per_topic=20,
        tokens_per_doc=14,
        dim=48,
        queries_per_topic=2,
        noise=0.4,
        vocab_size=512,
        stopword_tokens=3,
    )
    paths = gen_corpus(spec, out)
    return spec, paths
