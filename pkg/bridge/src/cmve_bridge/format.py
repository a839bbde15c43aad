"""Writer for the CMVE1 per-token embedding container.

This package only produces the format; consumers parse it. Layout, all
little-endian:

    magic   6 bytes  b"CMVE1\\0"
    dim     u32
    count   u64      number of records
    then per record:
        id      u64  internal record id
        ntok    u32  token count
        tokens  ntok * u32
        floats  ntok * dim * f32 (IEEE-754)

A sidecar TSV maps internal record id to the external identifier string
taken from the input file (docno or query id).
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import FormatError

MAGIC = b"CMVE1\x00"
_HEADER = struct.Struct("<IQ")
_REC_HEADER = struct.Struct("<QI")


def write_cmve(path, dim: int, records: Iterable[tuple[int, np.ndarray, np.ndarray]]) -> int:
    """Write ``(record_id, token_ids, embeddings)`` triples. Returns the count."""
    path = Path(path)
    records = list(records)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(dim, len(records)))
        for rec_id, token_ids, emb in records:
            emb = np.ascontiguousarray(emb, dtype=np.float32)
            token_ids = np.asarray(token_ids, dtype=np.uint32)
            if emb.ndim != 2 or emb.shape[1] != dim:
                raise FormatError(f"record {rec_id}: embedding shape {emb.shape} != (*, {dim})")
            if len(token_ids) != len(emb):
                raise FormatError(
                    f"record {rec_id}: {len(token_ids)} token ids for {len(emb)} embeddings"
                )
            fh.write(_REC_HEADER.pack(rec_id, len(token_ids)))
            fh.write(token_ids.astype("<u4").tobytes())
            fh.write(emb.astype("<f4").tobytes())
    return len(records)


def write_id_map(path, mapping: dict[int, str]) -> None:
    """Sidecar TSV: internal id -> external identifier, sorted by id."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for internal in sorted(mapping):
            fh.write(f"{internal}\t{mapping[internal]}\n")
