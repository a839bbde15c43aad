"""Command-line surface: export-corpus and export-queries.

Errors derived from BridgeError print one line to stderr in the form
``error:<category>: <message>`` and exit nonzero, matching the retrieval
engine's CLI conventions.
"""

from __future__ import annotations

import argparse
import sys

from .errors import BridgeError
from .export import ExportJob, export_corpus, export_queries


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BridgeError as exc:
        print(f"error:{exc.category}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error:io-error: {exc}", file=sys.stderr)
        return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cmve-bridge",
        description="Export per-token transformer embeddings to CMVE1 files",
    )
    sub = parser.add_subparsers(required=True)

    corpus = sub.add_parser("export-corpus", help="embed a (docno, text) TSV")
    _add_common(corpus)
    corpus.add_argument("--max-doc-tokens", type=int, default=180,
                        help="row budget per document, special tokens included")
    corpus.set_defaults(func=_cmd_corpus)

    queries = sub.add_parser("export-queries", help="embed a (query id, text) TSV")
    _add_common(queries)
    queries.add_argument("--query-embeddings", type=int, default=32,
                         help="exact row count per query, mask-padded")
    queries.set_defaults(func=_cmd_queries)
    return parser


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--checkpoint", required=True, help="model name or local path")
    sub.add_argument("--input", required=True, help="two-column TSV of id and text")
    sub.add_argument("--output", required=True, help="CMVE1 file to write")
    sub.add_argument("--batch-size", type=int, default=8)
    sub.add_argument("--device", default="cpu")
    sub.add_argument("--threads", type=int, default=1,
                     help="torch thread count; one keeps runs reproducible")
    sub.add_argument("--no-normalize", action="store_true",
                     help="keep raw hidden states instead of unit rows")
    sub.add_argument("--force", action="store_true", help="overwrite existing output")


def _job(args, **kwargs) -> ExportJob:
    return ExportJob(
        checkpoint=args.checkpoint,
        input_path=args.input,
        output_path=args.output,
        batch_size=args.batch_size,
        device=args.device,
        threads=args.threads,
        normalize=not args.no_normalize,
        force=args.force,
        **kwargs,
    )


def _cmd_corpus(args) -> int:
    result = export_corpus(_job(args, max_doc_tokens=args.max_doc_tokens))
    _report(result)
    return 0


def _cmd_queries(args) -> int:
    result = export_queries(_job(args, query_embeddings=args.query_embeddings))
    _report(result)
    return 0


def _report(result) -> None:
    print(f"wrote {result.records} records (skipped {result.skipped} empty) "
          f"dim {result.dim} -> {result.output_path}")


if __name__ == "__main__":
    sys.exit(main())
