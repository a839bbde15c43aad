"""Late-interaction scoring of query embeddings against stored documents.

A query is a bag of embeddings; a document contributes, per query
embedding, its best-matching stored embedding by dot product, and the
per-embedding maxima are summed. The expansion-weighted variant adds
the same quantity over weighted expansion embeddings scaled by a global
strength factor. Scores accumulate in float64 over float32 storage.
"""

from __future__ import annotations

import numpy as np

from . import accel
from .errors import ConfigError, DimensionError


def _as_matrix(arr: np.ndarray, name: str) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    if out.ndim != 2:
        raise DimensionError(f"{name} must be a 2-d array, got shape {arr.shape}")
    return out


def maxsim(query: np.ndarray, doc: np.ndarray) -> float:
    """Sum over query rows of the best dot product against doc rows."""
    q = _as_matrix(query, "query")
    d = _as_matrix(doc, "doc")
    if len(q) == 0:
        return 0.0
    if len(d) == 0:
        raise ConfigError("cannot score a document with no embeddings")
    if q.shape[1] != d.shape[1]:
        raise DimensionError(f"query dimension {q.shape[1]} != doc dimension {d.shape[1]}")
    sims = q @ d.T
    return float(sims.max(axis=1).sum())


def expansion_bonus(
    expansion: np.ndarray, weights: np.ndarray, doc: np.ndarray
) -> float:
    """Weighted sum over expansion rows of the best dot product in doc."""
    e = _as_matrix(expansion, "expansion")
    w = np.ascontiguousarray(weights, dtype=np.float64).reshape(-1)
    if len(w) != len(e):
        raise DimensionError(f"{len(w)} weights for {len(e)} expansion embeddings")
    if len(e) == 0:
        return 0.0
    d = _as_matrix(doc, "doc")
    if len(d) == 0:
        raise ConfigError("cannot score a document with no embeddings")
    if e.shape[1] != d.shape[1]:
        raise DimensionError(f"expansion dimension {e.shape[1]} != doc dimension {d.shape[1]}")
    sims = e @ d.T
    return float((w * sims.max(axis=1)).sum())


def prf_score(
    query: np.ndarray,
    expansion: np.ndarray,
    weights: np.ndarray,
    beta: float,
    doc: np.ndarray,
) -> float:
    """maxsim plus beta times the weighted expansion bonus.

    beta == 0 or an empty expansion reproduces maxsim bit for bit: the
    bonus term is skipped rather than multiplied by zero.
    """
    if beta < 0:
        raise ConfigError(f"beta must be >= 0, got {beta}")
    base = maxsim(query, doc)
    if beta == 0 or len(expansion) == 0:
        return base
    return base + beta * expansion_bonus(expansion, weights, doc)


def score_candidates(
    query: np.ndarray,
    flat_embeddings: np.ndarray,
    starts: np.ndarray,
    lengths: np.ndarray,
) -> np.ndarray:
    """maxsim of one query against many documents packed in a flat store.

    Document i occupies rows [starts[i], starts[i]+lengths[i]) of
    flat_embeddings. Returns one float64 score per document.
    """
    q = _as_matrix(query, "query")
    if len(lengths) and int(np.min(lengths)) < 1:
        raise ConfigError("cannot score a document with no embeddings")
    if len(q) == 0:
        return np.zeros(len(starts), dtype=np.float64)
    return accel.maxsim_segments(q, flat_embeddings, starts, lengths)


def score_candidates_weighted(
    query: np.ndarray,
    expansion: np.ndarray,
    weights: np.ndarray,
    beta: float,
    flat_embeddings: np.ndarray,
    starts: np.ndarray,
    lengths: np.ndarray,
) -> np.ndarray:
    """Batched prf_score over documents packed in a flat store."""
    if beta < 0:
        raise ConfigError(f"beta must be >= 0, got {beta}")
    base = score_candidates(query, flat_embeddings, starts, lengths)
    if beta == 0 or len(expansion) == 0:
        return base
    e = _as_matrix(expansion, "expansion")
    w = np.ascontiguousarray(weights, dtype=np.float64).reshape(-1)
    if len(w) != len(e):
        raise DimensionError(f"{len(w)} weights for {len(e)} expansion embeddings")
    per_row = accel.maxsim_segments_rows(e, flat_embeddings, starts, lengths)
    return base + beta * (per_row * w[:, None]).sum(axis=0)
