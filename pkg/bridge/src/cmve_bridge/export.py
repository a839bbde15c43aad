"""Export jobs: TSV of (identifier, text) in, CMVE1 plus sidecars out.

Each export produces three files next to each other:

    <output>            CMVE1 embeddings, internal ids 0..n-1 in input order
    <output>.ids.tsv    internal id -> external identifier from column one
    <output>.meta.json  the knobs that shaped the export, for provenance

Rows whose text is empty are skipped with a warning and consume no
internal id, so record ids stay contiguous. Identical inputs and
checkpoint produce byte-identical outputs; the encoder runs on a fixed
thread count and the metadata is serialized with sorted keys.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encode import CheckpointEncoder
from .errors import ConfigError, FormatError
from .format import write_cmve, write_id_map

TOKEN_FILTERING = "none (tokenizer output kept verbatim)"


@dataclass
class ExportJob:
    """Everything one export run needs; validation happens on construction."""

    checkpoint: str
    input_path: Path
    output_path: Path
    max_doc_tokens: int = 180
    query_embeddings: int = 32
    batch_size: int = 8
    device: str = "cpu"
    threads: int = 1
    normalize: bool = True
    force: bool = False

    def __post_init__(self):
        self.input_path = Path(self.input_path)
        self.output_path = Path(self.output_path)
        # two rows minimum: the tokenizer's opening and closing specials
        if self.max_doc_tokens < 2:
            raise ConfigError(f"max doc tokens must be >= 2, got {self.max_doc_tokens}")
        if self.query_embeddings < 2:
            raise ConfigError(f"query embeddings must be >= 2, got {self.query_embeddings}")
        if self.batch_size < 1:
            raise ConfigError(f"batch size must be positive, got {self.batch_size}")


@dataclass
class ExportResult:
    records: int
    skipped: int
    dim: int
    output_path: Path
    ids_path: Path
    meta_path: Path


def read_input_rows(path) -> list[tuple[int, str, str]]:
    """Parse the two-column input TSV into (line number, identifier, text)."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError(
                    f"{path}: line {lineno}: expected two tab-separated fields, "
                    f"got {len(parts)}"
                )
            rows.append((lineno, parts[0], parts[1]))
    return rows


def export_corpus(job: ExportJob) -> ExportResult:
    """Embed documents, one CMVE1 record per input row, <= max_doc_tokens rows."""
    return _export(job, kind="corpus")


def export_queries(job: ExportJob) -> ExportResult:
    """Embed queries, exactly query_embeddings rows each via mask padding."""
    return _export(job, kind="queries")


def _export(job: ExportJob, kind: str) -> ExportResult:
    ids_path = Path(f"{job.output_path}.ids.tsv")
    meta_path = Path(f"{job.output_path}.meta.json")
    if job.output_path.exists() and not job.force:
        raise ConfigError(f"output {job.output_path} exists (use force to overwrite)")

    encoder = CheckpointEncoder(job.checkpoint, device=job.device, threads=job.threads,
                                normalize=job.normalize)
    positions = getattr(encoder.model.config, "max_position_embeddings", None)
    positions = None if positions is None else int(positions)
    # queries materialize exactly this many rows; the doc budget is only a cap,
    # so documents are checked against their actual token counts further down
    if kind == "queries" and positions is not None and job.query_embeddings > positions:
        raise ConfigError(
            f"{job.query_embeddings} rows exceed the checkpoint's "
            f"{positions} position slots"
        )

    kept: list[tuple[str, str]] = []
    skipped = 0
    for lineno, external, text in read_input_rows(job.input_path):
        if not text.strip():
            print(f"warning: {job.input_path}:{lineno}: empty text for {external!r}, "
                  "skipped", file=sys.stderr)
            skipped += 1
            continue
        kept.append((external, text))

    if kind == "queries":
        id_lists = [encoder.query_token_ids(text, job.query_embeddings) for _, text in kept]
    else:
        id_lists = [encoder.doc_token_ids(text, job.max_doc_tokens) for _, text in kept]
    if positions is not None:
        for (external, _), ids in zip(kept, id_lists):
            if len(ids) > positions:
                raise ConfigError(
                    f"{external!r} needs {len(ids)} rows but the checkpoint has "
                    f"only {positions} position slots"
                )

    embeddings: list[np.ndarray] = []
    for start in range(0, len(id_lists), job.batch_size):
        embeddings.extend(encoder.encode_batch(id_lists[start : start + job.batch_size]))

    records = [
        (internal, np.asarray(ids, dtype=np.uint32), emb)
        for internal, (ids, emb) in enumerate(zip(id_lists, embeddings))
    ]
    write_cmve(job.output_path, encoder.dim, records)
    write_id_map(ids_path, {internal: external for internal, (external, _) in enumerate(kept)})

    meta = {
        "kind": kind,
        "checkpoint": job.checkpoint,
        "dimension": encoder.dim,
        "records": len(kept),
        "skipped_empty": skipped,
        "normalize": job.normalize,
        "token_filtering": TOKEN_FILTERING,
        "batch_size": job.batch_size,
        "device": job.device,
        "threads": job.threads,
        "vocab_size": encoder.vocab_size,
        "special_tokens": {
            "cls": encoder.tokenizer.cls_token_id,
            "sep": encoder.tokenizer.sep_token_id,
            "mask": encoder.mask_id,
            "pad": encoder.pad_id,
        },
    }
    if kind == "queries":
        meta["query_embeddings"] = job.query_embeddings
    else:
        meta["max_doc_tokens"] = job.max_doc_tokens
    with open(meta_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")

    return ExportResult(records=len(kept), skipped=skipped, dim=encoder.dim,
                        output_path=job.output_path, ids_path=ids_path,
                        meta_path=meta_path)
