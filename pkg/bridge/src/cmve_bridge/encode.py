"""Per-token embedding extraction from a transformer checkpoint.

Documents become one embedding row per input token, special tokens
included, truncated to a row budget. Queries are padded with the
tokenizer's mask token up to a fixed row count so every query file has
rectangular shape; the mask rows are genuine model inputs, not ignored
padding, so they receive contextualized embeddings like any other token.

Rows are L2-normalized by default so downstream dot products are cosine
similarities; consumers are expected to store rows verbatim.
"""

from __future__ import annotations

import numpy as np
import torch

from .errors import ConfigError, FormatError


class CheckpointEncoder:
    """Loads a checkpoint once and turns token id lists into float32 rows."""

    def __init__(self, checkpoint: str, device: str = "cpu", threads: int = 1,
                 normalize: bool = True):
        from transformers import AutoModel, AutoTokenizer
        from transformers.utils import logging as hf_logging

        hf_logging.disable_progress_bar()
        if threads < 1:
            raise ConfigError(f"threads must be positive, got {threads}")
        torch.set_num_threads(threads)
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(checkpoint)
            model = AutoModel.from_pretrained(checkpoint)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load checkpoint {checkpoint!r}: {exc}") from exc
        try:
            self.model = model.to(device).eval()
        except (RuntimeError, ValueError) as exc:
            raise ConfigError(f"cannot use device {device!r}: {exc}") from exc
        self.checkpoint = checkpoint
        self.device = device
        self.threads = threads
        self.normalize = normalize
        self.dim = int(self.model.config.hidden_size)
        self.vocab_size = int(self.tokenizer.vocab_size)
        self.mask_id = self.tokenizer.mask_token_id
        self.pad_id = self.tokenizer.pad_token_id
        if self.mask_id is None:
            raise ConfigError("checkpoint tokenizer defines no mask token")
        if self.pad_id is None:
            raise ConfigError("checkpoint tokenizer defines no padding token")

    def doc_token_ids(self, text: str, max_tokens: int) -> list[int]:
        """Tokenize with special tokens, truncated so len() <= max_tokens."""
        enc = self.tokenizer(text, add_special_tokens=True, truncation=True,
                             max_length=max_tokens)
        return self._checked(enc["input_ids"])

    def query_token_ids(self, text: str, rows: int) -> list[int]:
        """Tokenize then mask-pad so len() == rows exactly."""
        enc = self.tokenizer(text, add_special_tokens=True, truncation=True,
                             max_length=rows)
        ids = enc["input_ids"]
        ids = ids + [self.mask_id] * (rows - len(ids))
        return self._checked(ids)

    def _checked(self, ids: list[int]) -> list[int]:
        # tokenizers guarantee this; a violation means a broken checkpoint
        bad = [t for t in ids if t < 0 or t >= self.vocab_size]
        if bad:
            raise FormatError(f"token id {bad[0]} outside vocabulary of {self.vocab_size}")
        return ids

    def encode_batch(self, id_lists: list[list[int]]) -> list[np.ndarray]:
        """One forward pass over a batch of variable-length token id lists.

        Every provided id is a real model input (mask-padded query rows
        included). Batch padding added here is excluded via the attention
        mask and sliced off the output.
        """
        if not id_lists:
            return []
        longest = max(len(ids) for ids in id_lists)
        input_ids = torch.full((len(id_lists), longest), self.pad_id, dtype=torch.long)
        attention = torch.zeros((len(id_lists), longest), dtype=torch.long)
        for i, ids in enumerate(id_lists):
            input_ids[i, : len(ids)] = torch.tensor(ids, dtype=torch.long)
            attention[i, : len(ids)] = 1
        with torch.inference_mode():
            out = self.model(input_ids=input_ids.to(self.device),
                             attention_mask=attention.to(self.device))
        hidden = out.last_hidden_state.to("cpu").numpy()
        if hidden.shape[-1] != self.dim:
            raise FormatError(
                f"model produced width {hidden.shape[-1]}, checkpoint declares {self.dim}"
            )
        rows_out = []
        for i, ids in enumerate(id_lists):
            rows = np.ascontiguousarray(hidden[i, : len(ids)], dtype=np.float32)
            if self.normalize:
                norms = np.linalg.norm(rows, axis=1, keepdims=True)
                rows = rows / np.maximum(norms, np.float32(1e-12))
            rows_out.append(rows)
        return rows_out
