"""Seeded KMeans++ initialisation plus Lloyd refinement.

Centroid extraction over feedback embeddings needs reproducible clusters,
a fixed iteration budget, and well-defined behaviour when the input has
fewer distinct points than requested clusters, so this is implemented here
rather than delegated to a library:

* initialisation is the classic D^2-weighted seeding;
* Lloyd stops after ``max_iter`` rounds or when no centroid moves more
  than ``tol`` (Euclidean, per centroid);
* a cluster that ends up empty is re-seeded at the point currently
  farthest from its assigned centroid;
* when there are fewer points than clusters, surplus centroids are copies
  of existing points.

``inertia_history`` records the within-cluster sum of squares at every
assignment step; Lloyd guarantees it never increases.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import accel
from .errors import ConfigError

DEFAULT_MAX_ITER = 20
DEFAULT_TOL = 1e-4


@dataclass
class KMeansResult:
    centroids: np.ndarray  # (k, dim) float64
    labels: np.ndarray  # (n,) int64, final assignment
    inertia_history: list[float] = field(default_factory=list)
    n_iter: int = 0

    @property
    def inertia(self) -> float:
        return self.inertia_history[-1]


def _sq_dist_to(points: np.ndarray, center: np.ndarray) -> np.ndarray:
    diff = points - center
    return np.einsum("ij,ij->i", diff, diff)


def _plusplus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    chosen = [int(rng.integers(n))]
    d2 = _sq_dist_to(points, points[chosen[0]])
    while len(chosen) < k:
        total = float(d2.sum())
        if total <= 0.0:
            break
        cum = np.cumsum(d2)
        idx = int(np.searchsorted(cum, rng.random() * total, side="right"))
        idx = min(idx, n - 1)
        chosen.append(idx)
        d2 = np.minimum(d2, _sq_dist_to(points, points[idx]))
    # all remaining mass is zero: every point already coincides with a
    # chosen centre, so surplus centroids cycle over the data points
    i = 0
    while len(chosen) < k:
        chosen.append(i % n)
        i += 1
    return points[np.array(chosen, dtype=np.int64)].copy()


def kmeans(
    points: np.ndarray,
    k: int,
    seed: int,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> KMeansResult:
    """Cluster points into exactly k centroids.

    points may be any float array (n, dim); computation is float64.
    Raises ConfigError for k < 1 or an empty point set.
    """
    if k < 1:
        raise ConfigError(f"cluster count must be >= 1, got {k}")
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim != 2 or len(points) == 0:
        raise ConfigError("kmeans requires a non-empty (n, dim) point matrix")
    n = len(points)
    rng = np.random.default_rng(seed)

    if n <= k:
        # every point is its own centroid; surplus are copies
        idx = np.arange(k, dtype=np.int64) % n
        centroids = points[idx].copy()
    else:
        centroids = _plusplus_init(points, k, rng)

    history: list[float] = []
    labels = np.zeros(n, dtype=np.int64)
    iterations = 0
    for _ in range(max_iter):
        labels, sqdist = accel.assign_points(points, centroids)
        history.append(float(sqdist.sum()))
        iterations += 1

        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, points)
        new_centroids = centroids.copy()
        nonempty = counts > 0
        new_centroids[nonempty] = sums[nonempty] / counts[nonempty, None]

        empty = np.flatnonzero(~nonempty)
        if len(empty) > 0:
            # re-seed each empty cluster at the point farthest from its
            # centroid, never reusing the same point twice in one pass
            order = np.argsort(-sqdist, kind="stable")
            for slot, cluster in enumerate(empty):
                new_centroids[cluster] = points[order[slot % n]]

        movement = np.sqrt(np.einsum("ij,ij->i", new_centroids - centroids, new_centroids - centroids))
        centroids = new_centroids
        if float(movement.max()) < tol:
            break

    labels, sqdist = accel.assign_points(points, centroids)
    history.append(float(sqdist.sum()))
    return KMeansResult(centroids=centroids, labels=labels, inertia_history=history, n_iter=iterations)
