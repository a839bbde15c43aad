"""Timing comparison of the compiled kernels against the numpy fallbacks.

Run:  python3 benchmarks/bench_kernels.py
With MULTIVEC_DISABLE_NUMBA=1 only the numpy column is produced.
"""

from __future__ import annotations

import time

import numpy as np

from multivec import accel


def make_workload(rng, n_docs=4000, tokens_per_doc=24, dim=128, query_rows=32):
    lengths = np.full(n_docs, tokens_per_doc, dtype=np.int64)
    starts = (np.arange(n_docs, dtype=np.int64)) * tokens_per_doc
    flat = rng.standard_normal((n_docs * tokens_per_doc, dim)).astype(np.float32)
    query = rng.standard_normal((query_rows, dim))
    return query, flat, starts, lengths


def best_of(fn, reps=5):
    best = np.inf
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1000.0


def main():
    rng = np.random.default_rng(7)
    query, flat, starts, lengths = make_workload(rng)
    n_docs = len(starts)
    member_rows = rng.permutation(len(flat))[: len(flat) // 2].astype(np.int64)
    member_docs = (member_rows // lengths[0]).astype(np.int64)
    probe = rng.standard_normal(flat.shape[1])
    points = rng.standard_normal((20000, 64))
    centroids = rng.standard_normal((128, 64))

    cases = [
        (
            "maxsim_segments (32x128 q, 96k emb)",
            lambda f: f(query, flat, starts, lengths),
            accel.maxsim_segments_numpy,
            accel.maxsim_segments_numba,
        ),
        (
            "maxsim_segments_rows (same)",
            lambda f: f(query, flat, starts, lengths),
            accel.maxsim_segments_rows_numpy,
            accel.maxsim_segments_rows_numba,
        ),
        (
            "scan_best_dot (48k members)",
            lambda f: f(flat, member_rows, member_docs, probe, np.full(n_docs, -np.inf)),
            accel.scan_best_dot_numpy,
            accel.scan_best_dot_numba,
        ),
        (
            "assign_points (20k pts, 128 cents)",
            lambda f: f(points, centroids),
            accel.assign_points_numpy,
            accel.assign_points_numba,
        ),
    ]

    print(f"numba available: {accel.HAS_NUMBA}")
    header = f"{'kernel':<38} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for label, call, np_fn, nb_fn in cases:
        t_np = best_of(lambda: call(np_fn))
        if nb_fn is not None:
            call(nb_fn)  # trigger compilation outside the timed region
            t_nb = best_of(lambda: call(nb_fn))
            print(f"{label:<38} {t_np:>10.2f} {t_nb:>10.2f} {t_np / t_nb:>7.1f}x")
        else:
            print(f"{label:<38} {t_np:>10.2f} {'-':>10} {'-':>8}")


if __name__ == "__main__":
    main()
