"""Shared fixtures: a tiny deterministic checkpoint and sample inputs."""

from __future__ import annotations

import pytest
import torch

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "quick", "brown", "fox", "jumps", "over", "lazy", "dog",
    "river", "bank", "water", "flow", "##s", "##ing", ".", ",",
    "a", "of", "and", "dense", "token", "level", "match", "retrieval",
]

SENTENCE = "the quick brown fox jumps over the lazy dog"

CORPUS_ROWS = [
    ("d01", f"{SENTENCE} ."),
    ("d02", "the river bank and the water flow"),
    ("d03", "dense token level match retrieval"),
    ("d04", "a quick fox of the river , flowing"),
    ("d05", " ".join([SENTENCE] * 30)),
]

QUERY_ROWS = [
    ("q1", "quick fox"),
    ("q2", "water flow over the river bank"),
    ("q3", " ".join(["dense token level match"] * 12)),
    ("q4", "retrieval of token match"),
]


def write_tsv(path, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ident, text in rows:
            fh.write(f"{ident}\t{text}\n")


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory):
    from transformers import BertConfig, BertModel, BertTokenizer

    root = tmp_path_factory.mktemp("checkpoint")
    vocab_file = root / "vocab.txt"
    vocab_file.write_text("\n".join(VOCAB) + "\n", encoding="utf-8")
    tokenizer = BertTokenizer(str(vocab_file))
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=256,
    )
    torch.manual_seed(0)
    model = BertModel(config)
    out = root / "model"
    model.save_pretrained(out)
    tokenizer.save_pretrained(out)
    return str(out)


@pytest.fixture(scope="session")
def corpus_tsv(tmp_path_factory):
    path = tmp_path_factory.mktemp("inputs") / "corpus.tsv"
    write_tsv(path, CORPUS_ROWS)
    return path


@pytest.fixture(scope="session")
def queries_tsv(tmp_path_factory):
    path = tmp_path_factory.mktemp("inputs") / "queries.tsv"
    write_tsv(path, QUERY_ROWS)
    return path


@pytest.fixture(scope="session")
def corpus_export(checkpoint, corpus_tsv, tmp_path_factory):
    from cmve_bridge import ExportJob, export_corpus

    out = tmp_path_factory.mktemp("corpus_export") / "corpus.cmve"
    return export_corpus(ExportJob(checkpoint, corpus_tsv, out))


@pytest.fixture(scope="session")
def queries_export(checkpoint, queries_tsv, tmp_path_factory):
    from cmve_bridge import ExportJob, export_queries

    out = tmp_path_factory.mktemp("queries_export") / "queries.cmve"
    return export_queries(ExportJob(checkpoint, queries_tsv, out))
