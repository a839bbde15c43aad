"""Deterministic planted-topic corpus generator.

Every topic gets one anchor direction; anchors (topics plus shared
"stopword" anchors) are orthonormalized, so with zero noise same-topic
similarity strictly dominates cross-topic similarity. Document token
embeddings are unit-normalized anchor perturbations; every document
carries the same few stopword tokens (their IDF indexes to zero), the
rest of its tokens come from a per-topic vocabulary slice. Queries
perturb the topic anchor with independent noise and are padded to 32
rows by low-noise anchor copies, standing in for mask-token padding.

Qrels judge all same-topic documents at grade 2; with positive noise a
fixed 20% per query are demoted to grade 1 to exercise the
graded-to-binary relevance path. Output is byte-identical per seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .formats import DocRecord, write_cmve, write_id_map

QUERY_ROWS = 32
MAX_DOC_TOKENS = 180
DEMOTED_FRACTION = 0.2
MASK_NOISE_SCALE = 0.25


@dataclass
class SynthSpec:
    seed: int = 0
    n_topics: int = 8
    docs_per_topic: int = 50
    tokens_per_doc: int = 24
    dim: int = 128
    queries_per_topic: int = 2
    noise: float = 0.35
    vocab_size: int = 4096
    mask_rows: int = 24  # query padding rows out of the fixed 32
    stopword_tokens: int = 4

    def validate(self) -> None:
        for name, value in (
            ("n_topics", self.n_topics),
            ("docs_per_topic", self.docs_per_topic),
            ("tokens_per_doc", self.tokens_per_doc),
            ("dim", self.dim),
            ("queries_per_topic", self.queries_per_topic),
            ("vocab_size", self.vocab_size),
        ):
            if value < 1:
                raise ConfigError(f"{name} must be >= 1, got {value}")
        if self.noise < 0:
            raise ConfigError(f"noise must be >= 0, got {self.noise}")
        if self.tokens_per_doc > MAX_DOC_TOKENS:
            raise ConfigError(
                f"tokens_per_doc must be <= {MAX_DOC_TOKENS}, got {self.tokens_per_doc}"
            )
        if self.stopword_tokens < 0:
            raise ConfigError(f"stopword_tokens must be >= 0, got {self.stopword_tokens}")
        if self.stopword_tokens >= self.tokens_per_doc:
            raise ConfigError("stopword_tokens must leave room for content tokens")
        if not 0 <= self.mask_rows < QUERY_ROWS:
            raise ConfigError(f"mask_rows must be in [0, {QUERY_ROWS - 1}], got {self.mask_rows}")
        if self.n_topics + self.stopword_tokens > self.dim:
            raise ConfigError("anchor count (topics + stopwords) cannot exceed the dimension")
        if self.vocab_size < self.stopword_tokens + 1 + self.n_topics:
            raise ConfigError("vocabulary too small for stopwords, mask id, and topic slices")

    @property
    def doc_count(self) -> int:
        return self.n_topics * self.docs_per_topic

    @property
    def query_count(self) -> int:
        return self.n_topics * self.queries_per_topic

    @property
    def mask_token(self) -> int:
        return self.stopword_tokens

    def topic_slice(self, topic: int) -> tuple[int, int]:
        """Half-open token-id range owned by one topic."""
        content = self.vocab_size - self.stopword_tokens - 1
        per_topic = content // self.n_topics
        lo = self.stopword_tokens + 1 + topic * per_topic
        return lo, lo + per_topic


def _orthonormal_anchors(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    raw = rng.standard_normal((dim, count))
    q, _ = np.linalg.qr(raw)
    anchors = q.T
    signs = np.sign(anchors[np.arange(count), np.argmax(np.abs(anchors), axis=1)])
    return anchors * signs[:, None]


def _unit(rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    return rows / norms


def docno(topic: int, i: int) -> str:
    return f"t{topic:03d}d{i:04d}"


def query_id(topic: int, j: int) -> str:
    return f"q{topic:03d}x{j:02d}"


def gen_corpus(spec: SynthSpec, out_dir) -> dict[str, Path]:
    """Write corpus.cmve, docnos.tsv, queries.cmve, qids.tsv, qrels.txt."""
    spec.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)

    anchors = _orthonormal_anchors(rng, spec.n_topics + spec.stopword_tokens, spec.dim)
    topic_anchors = anchors[: spec.n_topics]
    stop_anchors = anchors[spec.n_topics :]

    n_content = spec.tokens_per_doc - spec.stopword_tokens
    doc_records: list[DocRecord] = []
    docnos: dict[int, str] = {}
    for topic in range(spec.n_topics):
        lo, hi = spec.topic_slice(topic)
        for i in range(spec.docs_per_topic):
            internal = topic * spec.docs_per_topic + i
            stop_tokens = np.arange(spec.stopword_tokens, dtype=np.uint32)
            content_tokens = rng.integers(lo, hi, size=n_content).astype(np.uint32)
            bases = np.concatenate(
                [stop_anchors, np.repeat(topic_anchors[topic][None, :], n_content, axis=0)]
            )
            noise = rng.standard_normal((spec.tokens_per_doc, spec.dim))
            embeddings = _unit(bases + spec.noise * noise).astype(np.float32)
            doc_records.append(
                DocRecord(internal, np.concatenate([stop_tokens, content_tokens]), embeddings)
            )
            docnos[internal] = docno(topic, i)

    query_records: list[DocRecord] = []
    qids: dict[int, str] = {}
    n_qcontent = QUERY_ROWS - spec.mask_rows
    for topic in range(spec.n_topics):
        lo, hi = spec.topic_slice(topic)
        for j in range(spec.queries_per_topic):
            internal = topic * spec.queries_per_topic + j
            content_tokens = rng.integers(lo, hi, size=n_qcontent).astype(np.uint32)
            mask_tokens = np.full(spec.mask_rows, spec.mask_token, dtype=np.uint32)
            anchor = topic_anchors[topic]
            content_noise = rng.standard_normal((n_qcontent, spec.dim))
            mask_noise = rng.standard_normal((spec.mask_rows, spec.dim))
            rows = np.concatenate(
                [
                    anchor + spec.noise * content_noise,
                    anchor + MASK_NOISE_SCALE * spec.noise * mask_noise,
                ]
            )
            query_records.append(
                DocRecord(
                    internal,
                    np.concatenate([content_tokens, mask_tokens]),
                    _unit(rows).astype(np.float32),
                )
            )
            qids[internal] = query_id(topic, j)

    qrels_lines: list[str] = []
    for topic in range(spec.n_topics):
        topic_docs = np.arange(spec.docs_per_topic)
        for j in range(spec.queries_per_topic):
            grades = np.full(spec.docs_per_topic, 2, dtype=np.int64)
            if spec.noise > 0:
                n_demote = int(DEMOTED_FRACTION * spec.docs_per_topic)
                if n_demote:
                    demoted = rng.choice(spec.docs_per_topic, size=n_demote, replace=False)
                    grades[demoted] = 1
            qid = query_id(topic, j)
            for i in topic_docs:
                qrels_lines.append(f"{qid} 0 {docno(topic, int(i))} {grades[i]}\n")

    paths = {
        "corpus": out / "corpus.cmve",
        "docnos": out / "docnos.tsv",
        "queries": out / "queries.cmve",
        "qids": out / "qids.tsv",
        "qrels": out / "qrels.txt",
    }
    write_cmve(paths["corpus"], spec.dim, doc_records)
    write_id_map(paths["docnos"], docnos)
    write_cmve(paths["queries"], spec.dim, query_records)
    write_id_map(paths["qids"], qids)
    with open(paths["qrels"], "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(qrels_lines)
    return paths
