"""Portable per-token embedding container ("CMVE1") and TSV sidecars.

CMVE1 layout, all little-endian:

    magic   6 bytes  b"CMVE1\\0"
    dim     u32
    count   u64      number of records
    then per record:
        id      u64  internal record id
        ntok    u32  token count
        tokens  ntok * u32
        floats  ntok * dim * f32 (IEEE-754)

A sidecar TSV maps internal record id to an external identifier string
(docno for corpora, query id for query files).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import FormatError

MAGIC = b"CMVE1\x00"
_HEADER = struct.Struct("<IQ")
_REC_HEADER = struct.Struct("<QI")


@dataclass
class DocRecord:
    """One record: an internal id, one token id per embedding, the embeddings."""

    doc_id: int
    token_ids: np.ndarray  # (n,) uint32
    embeddings: np.ndarray  # (n, dim) float32

    def __post_init__(self):
        self.token_ids = np.asarray(self.token_ids, dtype=np.uint32)
        self.embeddings = np.ascontiguousarray(self.embeddings, dtype=np.float32)
        if self.embeddings.ndim != 2:
            raise FormatError(f"record {self.doc_id}: embeddings must be a 2-d matrix")
        if len(self.token_ids) != len(self.embeddings):
            raise FormatError(
                f"record {self.doc_id}: {len(self.token_ids)} token ids for "
                f"{len(self.embeddings)} embeddings"
            )


def write_cmve(path, dim: int, records: Iterable[DocRecord]) -> int:
    """Write records to a CMVE1 file. Returns the record count."""
    path = Path(path)
    records = list(records)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(dim, len(records)))
        for rec in records:
            if rec.embeddings.shape[1] != dim:
                raise FormatError(
                    f"record {rec.doc_id}: dimension {rec.embeddings.shape[1]} != {dim}"
                )
            fh.write(_REC_HEADER.pack(rec.doc_id, len(rec.token_ids)))
            fh.write(rec.token_ids.astype("<u4").tobytes())
            fh.write(rec.embeddings.astype("<f4").tobytes())
    return len(records)


def _read_exact(fh, n: int, offset: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated file while reading {what}", offset=offset)
    return buf


def read_cmve(path) -> tuple[int, list[DocRecord]]:
    """Read a CMVE1 file. Returns (dim, records)."""
    path = Path(path)
    with open(path, "rb") as fh:
        offset = 0
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise FormatError(f"bad magic bytes {magic!r}, expected {MAGIC!r}", offset=0)
        offset += len(MAGIC)
        head = _read_exact(fh, _HEADER.size, offset, "header")
        dim, count = _HEADER.unpack(head)
        offset += _HEADER.size
        if dim == 0:
            raise FormatError("dimension must be positive", offset=len(MAGIC))
        records = []
        for i in range(count):
            head = _read_exact(fh, _REC_HEADER.size, offset, f"record {i} header")
            doc_id, ntok = _REC_HEADER.unpack(head)
            offset += _REC_HEADER.size
            tok_bytes = _read_exact(fh, 4 * ntok, offset, f"record {i} token ids")
            offset += 4 * ntok
            emb_bytes = _read_exact(fh, 4 * ntok * dim, offset, f"record {i} embeddings")
            offset += 4 * ntok * dim
            token_ids = np.frombuffer(tok_bytes, dtype="<u4").astype(np.uint32)
            emb = np.frombuffer(emb_bytes, dtype="<f4").astype(np.float32).reshape(ntok, dim)
            records.append(DocRecord(doc_id, token_ids, emb))
        trailing = fh.read(1)
        if trailing:
            raise FormatError("trailing bytes after final record", offset=offset)
    return dim, records


def write_id_map(path, mapping: dict[int, str]) -> None:
    """Sidecar TSV: internal id -> external identifier, sorted by id."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for internal in sorted(mapping):
            fh.write(f"{internal}\t{mapping[internal]}\n")


def read_id_map(path) -> dict[int, str]:
    mapping: dict[int, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError(f"{path}: line {lineno}: expected two tab-separated fields")
            try:
                internal = int(parts[0])
            except ValueError:
                raise FormatError(f"{path}: line {lineno}: non-integer internal id {parts[0]!r}")
            if internal in mapping:
                raise FormatError(f"{path}: line {lineno}: duplicate internal id {internal}")
            mapping[internal] = parts[1]
    return mapping
