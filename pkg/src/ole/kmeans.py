"""Seeded k-means with k-means++ initialization (Euclidean, Lloyd).

Row-order independence: points are processed in lexicographic value
order, so permuting the input rows cannot change which vectors become
centers. Ties everywhere break on value order, never on original row
index. Empty clusters are re-seeded from the point farthest from its
assigned center.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

MAX_LLOYD_ITERATIONS = 100


def _lexicographic_order(points: np.ndarray) -> np.ndarray:
    # np.lexsort sorts by the last key first; reverse so column 0 is primary
    return np.lexsort(points.T[::-1])


def _sq_dists(points: np.ndarray, center: np.ndarray) -> np.ndarray:
    diff = points - center
    return np.einsum("ij,ij->i", diff, diff)


def _plus_plus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]), dtype=np.float64)
    centers[0] = points[int(rng.integers(n))]
    d2 = _sq_dists(points, centers[0])
    for i in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            # every remaining point duplicates a chosen center
            idx = i % n
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), r, side="right"))
            idx = min(idx, n - 1)
        centers[i] = points[idx]
        d2 = np.minimum(d2, _sq_dists(points, centers[i]))
    return centers


def run_kmeans(
    points: np.ndarray, k: int, seed: int, max_iterations: int = MAX_LLOYD_ITERATIONS
) -> tuple[np.ndarray, np.ndarray]:
    """Cluster ``points`` into ``k`` groups.

    Returns ``(centers, assignments)`` with assignments indexed in the
    original row order. Deterministic given ``seed``; bit-identical under
    any permutation of the input rows.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if k < 1:
        raise ValidationError(f"cluster count must be >= 1, got {k}")
    if k > n:
        raise ValidationError(f"cluster count {k} exceeds point count {n}")

    order = _lexicographic_order(points)
    pts = points[order]
    rng = np.random.default_rng(seed)
    centers = _plus_plus_init(pts, k, rng)

    assign = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iterations):
        # squared distances to every center; argmin ties go to the lowest index
        d2 = (
            np.einsum("ij,ij->i", pts, pts)[:, None]
            - 2.0 * (pts @ centers.T)
            + np.einsum("ij,ij->i", centers, centers)[None, :]
        )
        new_assign = np.argmin(d2, axis=1)

        counts = np.bincount(new_assign, minlength=k)
        reseeded = False
        if np.any(counts == 0):
            # move each empty center onto the point farthest from its center
            own = d2[np.arange(n), new_assign].copy()
            for c in np.flatnonzero(counts == 0):
                far = int(np.argmax(own))
                centers[c] = pts[far]
                own[far] = -np.inf
            reseeded = True

        if not reseeded and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        if reseeded:
            continue
        for c in range(k):
            members = pts[assign == c]
            centers[c] = members.mean(axis=0)

    assignments = np.empty(n, dtype=np.int64)
    assignments[order] = assign
    return centers, assignments
