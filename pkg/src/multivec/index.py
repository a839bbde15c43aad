"""Immutable multi-vector index over per-token document embeddings.

Build once, then query three ways: approximate document retrieval per
probe embedding (IVF-style coarse cells scanned by dot product), exact
nearest-token lookup, and exact per-document embedding access for
rescoring. Document-frequency statistics back the IDF weighting.

The index is deterministic for a fixed input stream and build seed, and
safe for concurrent reads once built.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import accel
from .cluster import kmeans
from .errors import ConfigError, DimensionError, FormatError, UnknownDocumentError
from .formats import DocRecord, read_cmve, read_id_map, write_cmve, write_id_map

MAX_CELLS = 65536
QUANTIZER_MAGIC = b"MVQZ1\x00"
IDF_MAGIC = b"MVDF1\x00"


@dataclass
class IndexBuildConfig:
    cells: int | None = None  # default ceil(sqrt(total embeddings)), clamped
    sample_rate: float = 0.05
    seed: int = 0

    def validate(self) -> None:
        if self.cells is not None and self.cells < 1:
            raise ConfigError(f"cell count must be >= 1, got {self.cells}")
        if not 0.0 < self.sample_rate <= 1.0:
            raise ConfigError(f"sample rate must be in (0, 1], got {self.sample_rate}")


@dataclass
class CoarseQuantizer:
    """Cell centroids plus per-cell member embedding rows (ascending)."""

    centroids: np.ndarray  # (n_cells, dim) float64
    cell_members: list[np.ndarray]  # per cell (count,) int64

    @property
    def n_cells(self) -> int:
        return len(self.centroids)


@dataclass
class IndexedCorpus:
    dim: int
    embeddings: np.ndarray  # (total, dim) float32, contiguous store
    doc_offsets: np.ndarray  # (n_docs, 2) int64: (start, length)
    token_ids: np.ndarray  # (total,) uint32, one per stored embedding
    emb_doc_ids: np.ndarray  # (total,) int64, owning doc per embedding
    doc_freq: dict[int, int]  # token id -> number of docs containing it
    quantizer: CoarseQuantizer
    docnos: list[str]  # internal doc id -> external identifier
    build_seed: int = 0
    sample_rate: float = 0.05
    _embeddings64: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def doc_count(self) -> int:
        return len(self.doc_offsets)

    @property
    def embedding_count(self) -> int:
        return len(self.embeddings)

    def dense_store(self) -> np.ndarray:
        """float64 copy of the store, cached; used by exact full scans."""
        if self._embeddings64 is None:
            self._embeddings64 = self.embeddings.astype(np.float64)
        return self._embeddings64

    def idf(self, token_id: int) -> float:
        """log((N+1)/(N_i+1)); an unseen token has N_i = 0."""
        n_i = self.doc_freq.get(int(token_id), 0)
        return math.log((self.doc_count + 1) / (n_i + 1))

    def doc_embeddings(self, doc_id: int) -> np.ndarray:
        """Exact stored embeddings of one document, ingestion order."""
        if not 0 <= doc_id < self.doc_count:
            raise UnknownDocumentError(f"doc id {doc_id} not in index (0..{self.doc_count - 1})")
        start, length = self.doc_offsets[doc_id]
        return self.embeddings[start : start + length]

    def ann_docs(self, q: np.ndarray, k_prime: int, nprobe: int) -> np.ndarray:
        """Up to k_prime distinct doc ids by best embedding dot product.

        Scans the nprobe cells whose centroids have the highest dot product
        with q; nprobe beyond the cell count is clamped (search is then
        exact). Ties broken by ascending doc id.
        """
        q64 = self._check_probe(q)
        if k_prime < 1:
            raise ConfigError(f"k_prime must be >= 1, got {k_prime}")
        if nprobe < 1:
            raise ConfigError(f"nprobe must be >= 1, got {nprobe}")
        quant = self.quantizer
        nprobe = min(nprobe, quant.n_cells)
        cell_scores = quant.centroids @ q64
        probe_order = np.lexsort((np.arange(quant.n_cells), -cell_scores))[:nprobe]
        members = np.concatenate([quant.cell_members[c] for c in probe_order])
        if len(members) == 0:
            return np.empty(0, dtype=np.int64)
        best = np.full(self.doc_count, -np.inf)
        accel.scan_best_dot(self.embeddings, members, self.emb_doc_ids[members], q64, best)
        seen = np.flatnonzero(best > -np.inf)
        ranked = seen[np.lexsort((seen, -best[seen]))]
        return ranked[:k_prime]

    def ann_tokens(self, v: np.ndarray, r: int) -> np.ndarray:
        """Token ids of the r stored embeddings closest to v (highest dot).

        Returned with multiplicity, nearest first; ties by ascending
        embedding row. r beyond the store size is clamped.
        """
        v64 = self._check_probe(v)
        if r < 1:
            raise ConfigError(f"r must be >= 1, got {r}")
        rows = nearest_rows(self.dense_store(), v64, r)
        return self.token_ids[rows]

    def _check_probe(self, v: np.ndarray) -> np.ndarray:
        v64 = np.ascontiguousarray(v, dtype=np.float64).reshape(-1)
        if len(v64) != self.dim:
            raise DimensionError(f"probe has dimension {len(v64)}, index has {self.dim}")
        return v64


def nearest_rows(store64: np.ndarray, v64: np.ndarray, r: int) -> np.ndarray:
    """Rows of store64 with the highest dot product against v64.

    Exact scan; ties broken by ascending row. Clamped to the store size.
    """
    return top_rows_by_dot(store64 @ v64, r)


def top_rows_by_dot(dots: np.ndarray, r: int) -> np.ndarray:
    """Indices of the r largest dots, descending, ties by ascending index."""
    n = len(dots)
    r_eff = min(r, n)
    if r_eff == n:
        chosen = np.arange(n, dtype=np.int64)
    else:
        part = np.argpartition(-dots, r_eff - 1)[:r_eff]
        thresh = dots[part].min()
        strictly = np.flatnonzero(dots > thresh)
        ties = np.flatnonzero(dots == thresh)
        chosen = np.concatenate([strictly, ties[: r_eff - len(strictly)]])
    return chosen[np.lexsort((chosen, -dots[chosen]))]


def gather_ranges(starts: np.ndarray, lengths: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Index vector covering [start, start+length) per segment, concatenated.

    Returns (row_indices, out_starts) where out_starts locates each segment
    in the concatenated result.
    """
    lengths = np.ascontiguousarray(lengths, dtype=np.int64)
    starts = np.ascontiguousarray(starts, dtype=np.int64)
    total = int(lengths.sum())
    out_starts = np.zeros(len(lengths), dtype=np.int64)
    np.cumsum(lengths[:-1], out=out_starts[1:])
    rows = np.repeat(starts - out_starts, lengths) + np.arange(total, dtype=np.int64)
    return rows, out_starts


def build_index(
    records: Sequence[DocRecord],
    docnos: dict[int, str] | None = None,
    config: IndexBuildConfig | None = None,
) -> IndexedCorpus:
    """Build the immutable index from an embedding stream.

    Records must share one dimension and have unique, non-empty ids;
    the stream order fixes internal doc ids. The coarse quantizer is
    trained on a uniform sample of the embeddings (sample_rate, floored
    at 10x the cell count) with seeded KMeans++, so two builds from the
    same stream and seed are identical.
    """
    config = config or IndexBuildConfig()
    config.validate()
    records = list(records)
    if not records:
        raise ConfigError("cannot build an index from an empty stream")

    dim = records[0].embeddings.shape[1]
    seen_ids: set[int] = set()
    for rec in records:
        if rec.embeddings.shape[1] != dim:
            raise DimensionError(
                f"doc {rec.doc_id}: dimension {rec.embeddings.shape[1]} != {dim}"
            )
        if len(rec.embeddings) == 0:
            raise FormatError(f"doc {rec.doc_id} has no embeddings")
        if rec.doc_id in seen_ids:
            raise FormatError(f"duplicate doc id {rec.doc_id} in stream")
        seen_ids.add(rec.doc_id)
        if not np.all(np.isfinite(rec.embeddings)):
            raise FormatError(f"doc {rec.doc_id} contains non-finite embedding values")

    docnos = docnos or {}
    doc_names = [docnos.get(rec.doc_id, str(rec.doc_id)) for rec in records]

    lengths = np.array([len(r.embeddings) for r in records], dtype=np.int64)
    starts = np.zeros(len(records), dtype=np.int64)
    np.cumsum(lengths[:-1], out=starts[1:])
    doc_offsets = np.stack([starts, lengths], axis=1)
    embeddings = np.concatenate([r.embeddings for r in records]).astype(np.float32)
    token_ids = np.concatenate([r.token_ids for r in records]).astype(np.uint32)
    emb_doc_ids = np.repeat(np.arange(len(records), dtype=np.int64), lengths)

    doc_freq: dict[int, int] = {}
    for rec in records:
        for tok in np.unique(rec.token_ids):
            tok = int(tok)
            doc_freq[tok] = doc_freq.get(tok, 0) + 1

    quantizer = _train_quantizer(embeddings, config)

    return IndexedCorpus(
        dim=dim,
        embeddings=embeddings,
        doc_offsets=doc_offsets,
        token_ids=token_ids,
        emb_doc_ids=emb_doc_ids,
        doc_freq=doc_freq,
        quantizer=quantizer,
        docnos=doc_names,
        build_seed=config.seed,
        sample_rate=config.sample_rate,
    )


def default_cell_count(total_embeddings: int) -> int:
    return max(1, min(MAX_CELLS, math.ceil(math.sqrt(total_embeddings))))


def quantizer_sample_size(total: int, n_cells: int, sample_rate: float) -> int:
    return min(total, max(math.ceil(sample_rate * total), 10 * n_cells))


def _train_quantizer(embeddings: np.ndarray, config: IndexBuildConfig) -> CoarseQuantizer:
    total = len(embeddings)
    n_cells = config.cells if config.cells is not None else default_cell_count(total)
    n_cells = min(n_cells, MAX_CELLS)
    rng = np.random.default_rng(config.seed)
    size = quantizer_sample_size(total, n_cells, config.sample_rate)
    sample_rows = np.sort(rng.choice(total, size=size, replace=False))
    sample = embeddings[sample_rows].astype(np.float64)
    result = kmeans(sample, n_cells, seed=config.seed)
    labels, _ = accel.assign_points(embeddings.astype(np.float64), result.centroids)
    order = np.argsort(labels, kind="stable")
    counts = np.bincount(labels, minlength=n_cells)
    bounds = np.zeros(n_cells + 1, dtype=np.int64)
    np.cumsum(counts, out=bounds[1:])
    cell_members = [order[bounds[c] : bounds[c + 1]] for c in range(n_cells)]
    return CoarseQuantizer(centroids=result.centroids, cell_members=cell_members)


def save_index(index: IndexedCorpus, out_dir) -> None:
    """Serialize to a directory; byte-identical for identical builds."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = [
        DocRecord(
            doc_id,
            index.token_ids[start : start + length],
            index.embeddings[start : start + length],
        )
        for doc_id, (start, length) in enumerate(index.doc_offsets)
    ]
    write_cmve(out / "embeddings.cmve", index.dim, records)
    write_id_map(out / "docnos.tsv", dict(enumerate(index.docnos)))

    quant = index.quantizer
    with open(out / "quantizer.bin", "wb") as fh:
        fh.write(QUANTIZER_MAGIC)
        fh.write(struct.pack("<II", index.dim, quant.n_cells))
        fh.write(quant.centroids.astype("<f8").tobytes())
        for members in quant.cell_members:
            fh.write(struct.pack("<Q", len(members)))
            fh.write(members.astype("<u8").tobytes())

    with open(out / "idf.bin", "wb") as fh:
        fh.write(IDF_MAGIC)
        fh.write(struct.pack("<QQ", index.doc_count, len(index.doc_freq)))
        for tok in sorted(index.doc_freq):
            fh.write(struct.pack("<IQ", tok, index.doc_freq[tok]))

    meta = {
        "format": "MVIX1",
        "dim": index.dim,
        "doc_count": index.doc_count,
        "embedding_count": index.embedding_count,
        "cells": quant.n_cells,
        "seed": index.build_seed,
        "sample_rate": index.sample_rate,
    }
    with open(out / "meta.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_index(index_dir) -> IndexedCorpus:
    src = Path(index_dir)
    meta_path = src / "meta.json"
    if not meta_path.exists():
        raise FormatError(f"{src} is not an index directory (missing meta.json)")
    meta = json.loads(meta_path.read_text())

    dim, records = read_cmve(src / "embeddings.cmve")
    docnos = read_id_map(src / "docnos.tsv")

    with open(src / "quantizer.bin", "rb") as fh:
        magic = fh.read(len(QUANTIZER_MAGIC))
        if magic != QUANTIZER_MAGIC:
            raise FormatError("bad quantizer magic", offset=0)
        qdim, n_cells = struct.unpack("<II", fh.read(8))
        if qdim != dim:
            raise DimensionError(f"quantizer dimension {qdim} != corpus dimension {dim}")
        centroids = np.frombuffer(fh.read(n_cells * dim * 8), dtype="<f8").reshape(n_cells, dim)
        centroids = centroids.astype(np.float64)
        cell_members = []
        for _ in range(n_cells):
            (count,) = struct.unpack("<Q", fh.read(8))
            members = np.frombuffer(fh.read(count * 8), dtype="<u8").astype(np.int64)
            cell_members.append(members)

    with open(src / "idf.bin", "rb") as fh:
        magic = fh.read(len(IDF_MAGIC))
        if magic != IDF_MAGIC:
            raise FormatError("bad idf magic", offset=0)
        n_docs, n_entries = struct.unpack("<QQ", fh.read(16))
        doc_freq = {}
        for _ in range(n_entries):
            tok, count = struct.unpack("<IQ", fh.read(12))
            doc_freq[tok] = count

    lengths = np.array([len(r.embeddings) for r in records], dtype=np.int64)
    starts = np.zeros(len(records), dtype=np.int64)
    np.cumsum(lengths[:-1], out=starts[1:])
    index = IndexedCorpus(
        dim=dim,
        embeddings=np.concatenate([r.embeddings for r in records]).astype(np.float32),
        doc_offsets=np.stack([starts, lengths], axis=1),
        token_ids=np.concatenate([r.token_ids for r in records]).astype(np.uint32),
        emb_doc_ids=np.repeat(np.arange(len(records), dtype=np.int64), lengths),
        doc_freq=doc_freq,
        quantizer=CoarseQuantizer(centroids=centroids, cell_members=cell_members),
        docnos=[docnos[i] for i in range(len(records))],
        build_seed=int(meta.get("seed", 0)),
        sample_rate=float(meta.get("sample_rate", 0.05)),
    )
    if n_docs != index.doc_count:
        raise FormatError(f"idf table doc count {n_docs} != corpus doc count {index.doc_count}")
    return index
