"""k-nearest-neighbor search: exact for small inputs, projection forest above.

The exact path computes chunked dense distances. Past ``EXACT_THRESHOLD``
points an approximate search takes over: several random-hyperplane trees
propose candidates, refined by one neighbors-of-neighbors pass.
"""

from __future__ import annotations

import numpy as np

EXACT_THRESHOLD = 20000

_CHUNK = 2048


def knn_search(
    points: np.ndarray,
    k: int,
    seed: int = 0,
    exact_threshold: int = EXACT_THRESHOLD,
) -> tuple[np.ndarray, np.ndarray]:
    """Indices and distances of the k nearest neighbors of every point.

    Self-matches are excluded. Returns ``(indices, distances)`` of shape
    (n, k), each row sorted ascending by (distance, index).
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    n = points.shape[0]
    if k >= n:
        raise ValueError(f"k={k} requires at least k+1 points, got {n}")
    if n <= exact_threshold:
        return exact_knn(points, k)
    return rp_forest_knn(points, k, seed=seed)


def exact_knn(points: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    n = points.shape[0]
    sq = np.einsum("ij,ij->i", points, points)
    idx_out = np.empty((n, k), dtype=np.int64)
    dist_out = np.empty((n, k), dtype=np.float64)
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        block = points[start:stop]
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * (block @ points.T)
        np.maximum(d2, 0.0, out=d2)
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        part = np.argpartition(d2, k - 1, axis=1)[:, :k]
        part_d = np.take_along_axis(d2, part, axis=1)
        order = np.lexsort((part, part_d), axis=1)
        idx_out[start:stop] = np.take_along_axis(part, order, axis=1)
        dist_out[start:stop] = np.take_along_axis(part_d, order, axis=1)
    return idx_out, np.sqrt(dist_out)


def kth_neighbor_distance(
    points: np.ndarray,
    k: int,
    exact_threshold: int = EXACT_THRESHOLD,
    seed: int = 0,
) -> np.ndarray:
    """Distance from each point to its k-th nearest neighbor (self excluded)."""
    _, dists = knn_search(points, k, seed=seed, exact_threshold=exact_threshold)
    return dists[:, k - 1]


def rp_forest_knn(
    points: np.ndarray,
    k: int,
    seed: int = 0,
    n_trees: int = 8,
    leaf_size: int = 64,
) -> tuple[np.ndarray, np.ndarray]:
    """Approximate kNN from a random-projection forest plus one refinement."""
    n = points.shape[0]
    rng = np.random.default_rng(seed)
    best_d = np.full((n, k), np.inf)
    best_i = np.full((n, k), -1, dtype=np.int64)
    for _ in range(n_trees):
        for leaf in _rp_leaves(points, np.arange(n, dtype=np.int64), leaf_size, rng):
            _update_from_candidates(points, leaf, leaf, best_d, best_i)
    _refine_with_neighbors(points, best_d, best_i)
    return best_i, best_d


def _rp_leaves(points, indices, leaf_size, rng):
    stack = [indices]
    while stack:
        idx = stack.pop()
        if idx.shape[0] <= max(leaf_size, 2):
            yield idx
            continue
        direction = rng.standard_normal(points.shape[1])
        proj = points[idx] @ direction
        pivot = np.median(proj)
        left = idx[proj <= pivot]
        right = idx[proj > pivot]
        if left.shape[0] == 0 or right.shape[0] == 0:
            # degenerate split (duplicated points); stop descending
            yield idx
            continue
        stack.append(left)
        stack.append(right)


def _update_from_candidates(points, rows, candidates, best_d, best_i):
    """Merge candidate distances into each row's current best-k arrays."""
    d2 = (
        np.einsum("ij,ij->i", points[rows], points[rows])[:, None]
        + np.einsum("ij,ij->i", points[candidates], points[candidates])[None, :]
        - 2.0 * points[rows] @ points[candidates].T
    )
    np.maximum(d2, 0.0, out=d2)
    dist = np.sqrt(d2)
    dist[rows[:, None] == candidates[None, :]] = np.inf
    k = best_d.shape[1]
    cand_ids = np.broadcast_to(candidates, dist.shape)
    all_d = np.concatenate([best_d[rows], dist], axis=1)
    all_i = np.concatenate([best_i[rows], cand_ids], axis=1)
    # drop duplicate candidate ids by keeping the first occurrence
    order = np.lexsort((all_i, all_d), axis=1)
    all_d = np.take_along_axis(all_d, order, axis=1)
    all_i = np.take_along_axis(all_i, order, axis=1)
    for r, row in enumerate(rows):
        seen: set[int] = set()
        filled = 0
        for c in range(all_i.shape[1]):
            ci = int(all_i[r, c])
            if ci < 0 or ci in seen or not np.isfinite(all_d[r, c]):
                continue
            seen.add(ci)
            best_d[row, filled] = all_d[r, c]
            best_i[row, filled] = ci
            filled += 1
            if filled == k:
                break
        while filled < k:
            best_d[row, filled] = np.inf
            best_i[row, filled] = -1
            filled += 1


def _refine_with_neighbors(points, best_d, best_i):
    n, k = best_i.shape
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        for row in range(start, stop):
            neigh = best_i[row]
            neigh = neigh[neigh >= 0]
            if neigh.size == 0:
                continue
            cand = np.unique(best_i[neigh])
            cand = cand[(cand >= 0) & (cand != row)]
            if cand.size == 0:
                continue
            _update_from_candidates(
                points,
                np.asarray([row], dtype=np.int64),
                cand,
                best_d,
                best_i,
            )
