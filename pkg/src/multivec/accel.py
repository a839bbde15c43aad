"""Hot numeric kernels: numba-compiled with a pure-numpy fallback.

The numba path is used whenever numba imports cleanly; setting the
environment variable ``MULTIVEC_DISABLE_NUMBA=1`` forces the numpy path.
Both paths are deterministic on fixed inputs. ``benchmarks/bench_kernels.py``
compares them.

Kernels operate on the flat embedding store layout: one (n_embeddings, dim)
float32 matrix plus per-document (start, length) segments.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("MULTIVEC_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if _DISABLED:
        raise ImportError("numba disabled by MULTIVEC_DISABLE_NUMBA")
    from numba import njit, prange

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False


def maxsim_segments_numpy(query, flat, starts, lengths):
    """Late-interaction score of one query against contiguous doc segments.

    query: (m, d) float64; flat: (n, d) float32 where segment i occupies
    rows starts[i] .. starts[i]+lengths[i]. Every segment must be non-empty
    (maximum.reduceat misbehaves on empty slices). Returns (k,) float64.
    """
    sim = query @ flat.T.astype(np.float64)
    per_doc_max = np.maximum.reduceat(sim, starts, axis=1)
    return per_doc_max.sum(axis=0)


def maxsim_segments_rows_numpy(query, flat, starts, lengths):
    """Per-query-row best dot product per segment; (m, k) float64.

    Same layout contract as maxsim_segments_numpy: segments are packed,
    non-empty, and tile the flat matrix in order.
    """
    sim = query @ flat.T.astype(np.float64)
    return np.maximum.reduceat(sim, starts, axis=1)


def scan_best_dot_numpy(flat, member_rows, member_docs, q, best):
    """Update per-document best dot products for the scanned embeddings.

    best is a dense (n_docs,) float64 array initialised to -inf; entries for
    documents touched by member_rows are raised in place.
    """
    dots = flat[member_rows].astype(np.float64) @ q
    np.maximum.at(best, member_docs, dots)


def assign_points_numpy(points, centroids):
    """Nearest-centroid assignment (squared Euclidean, ties to lowest index).

    Returns (labels int64, sqdist float64); sqdist is recomputed directly
    against the chosen centroid so both backends report the same inertia.
    """
    p_sq = np.einsum("ij,ij->i", points, points)
    c_sq = np.einsum("ij,ij->i", centroids, centroids)
    d2 = p_sq[:, None] - 2.0 * (points @ centroids.T) + c_sq[None, :]
    labels = np.argmin(d2, axis=1).astype(np.int64)
    diff = points - centroids[labels]
    sqdist = np.einsum("ij,ij->i", diff, diff)
    return labels, sqdist


if HAS_NUMBA:

    @njit(parallel=True, cache=True)
    def _maxsim_segments_nb(query, flat, starts, lengths):
        m = query.shape[0]
        d = query.shape[1]
        k = starts.shape[0]
        out = np.empty(k, dtype=np.float64)
        for s in prange(k):
            lo = starts[s]
            n = lengths[s]
            total = 0.0
            for i in range(m):
                best = -np.inf
                for j in range(n):
                    acc = 0.0
                    row = lo + j
                    for c in range(d):
                        acc += query[i, c] * flat[row, c]
                    if acc > best:
                        best = acc
                total += best
            out[s] = total
        return out

    @njit(parallel=True, cache=True)
    def _maxsim_segments_rows_nb(query, flat, starts, lengths):
        m = query.shape[0]
        d = query.shape[1]
        k = starts.shape[0]
        out = np.empty((m, k), dtype=np.float64)
        for s in prange(k):
            lo = starts[s]
            n = lengths[s]
            for i in range(m):
                best = -np.inf
                for j in range(n):
                    acc = 0.0
                    row = lo + j
                    for c in range(d):
                        acc += query[i, c] * flat[row, c]
                    if acc > best:
                        best = acc
                out[i, s] = best
        return out

    @njit(cache=True)
    def _scan_best_dot_nb(flat, member_rows, member_docs, q, best):
        d = flat.shape[1]
        for i in range(member_rows.shape[0]):
            row = member_rows[i]
            acc = 0.0
            for c in range(d):
                acc += flat[row, c] * q[c]
            doc = member_docs[i]
            if acc > best[doc]:
                best[doc] = acc

    @njit(parallel=True, cache=True)
    def _assign_points_nb(points, centroids):
        n = points.shape[0]
        k = centroids.shape[0]
        d = points.shape[1]
        labels = np.empty(n, dtype=np.int64)
        sqdist = np.empty(n, dtype=np.float64)
        for i in prange(n):
            best = np.inf
            best_j = 0
            for j in range(k):
                acc = 0.0
                for c in range(d):
                    diff = points[i, c] - centroids[j, c]
                    acc += diff * diff
                if acc < best:
                    best = acc
                    best_j = j
            labels[i] = best_j
            sqdist[i] = best
        return labels, sqdist

    def maxsim_segments_numba(query, flat, starts, lengths):
        return _maxsim_segments_nb(
            np.ascontiguousarray(query),
            flat,
            np.ascontiguousarray(starts),
            np.ascontiguousarray(lengths),
        )

    def maxsim_segments_rows_numba(query, flat, starts, lengths):
        return _maxsim_segments_rows_nb(
            np.ascontiguousarray(query),
            flat,
            np.ascontiguousarray(starts),
            np.ascontiguousarray(lengths),
        )

    def scan_best_dot_numba(flat, member_rows, member_docs, q, best):
        _scan_best_dot_nb(flat, member_rows, member_docs, np.ascontiguousarray(q), best)

    def assign_points_numba(points, centroids):
        return _assign_points_nb(
            np.ascontiguousarray(points), np.ascontiguousarray(centroids)
        )

    maxsim_segments = maxsim_segments_numba
    maxsim_segments_rows = maxsim_segments_rows_numba
    scan_best_dot = scan_best_dot_numba
    assign_points = assign_points_numba
else:
    maxsim_segments_numba = None
    maxsim_segments_rows_numba = None
    scan_best_dot_numba = None
    assign_points_numba = None

    maxsim_segments = maxsim_segments_numpy
    maxsim_segments_rows = maxsim_segments_rows_numpy
    scan_best_dot = scan_best_dot_numpy
    assign_points = assign_points_numpy
