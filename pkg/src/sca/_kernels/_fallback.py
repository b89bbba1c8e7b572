"""Pure-numpy versions of the hot kernels.

These mirror the compiled extension exactly: same accumulation order, same
elementwise arithmetic, so either backend produces the same trees and
layouts. They are what runs when the extension was not built.
"""

from __future__ import annotations

import numpy as np

IS_COMPILED = False


def prim_mst(points: np.ndarray, core: np.ndarray):
    """Minimum spanning tree of the mutual-reachability graph, grown from 0.

    Edge weight between i and j is max(core[i], core[j], euclidean(i, j)).
    Returns (heads, tails, weights) in insertion order; ties in the frontier
    selection go to the lowest point index.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    core = np.ascontiguousarray(core, dtype=np.float64)
    n = points.shape[0]
    heads = np.empty(n - 1, dtype=np.int64)
    tails = np.empty(n - 1, dtype=np.int64)
    weights = np.empty(n - 1, dtype=np.float64)
    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    current = 0
    in_tree[0] = True
    for step in range(n - 1):
        diff = points - points[current]
        dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        mreach = np.maximum(np.maximum(core, core[current]), dist)
        closer = ~in_tree & (mreach < best)
        best[closer] = mreach[closer]
        parent[closer] = current
        frontier = np.where(in_tree, np.inf, best)
        nxt = int(np.argmin(frontier))
        heads[step] = parent[nxt]
        tails[step] = nxt
        weights[step] = best[nxt]
        in_tree[nxt] = True
        current = nxt
    return heads, tails, weights


def union_find_linkage(us: np.ndarray, vs: np.ndarray, ws: np.ndarray, n: int):
    """Single-linkage merge table from weight-sorted MST edges.

    Rows are (smaller cluster id, larger cluster id, weight, member count);
    merged clusters get ids n, n+1, ... in merge order, like scipy linkage.
    """
    parent = np.arange(2 * n - 1, dtype=np.int64)
    size = np.ones(2 * n - 1, dtype=np.int64)
    out = np.empty((n - 1, 4), dtype=np.float64)

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    for step in range(n - 1):
        ra = find(int(us[step]))
        rb = find(int(vs[step]))
        new = n + step
        parent[ra] = new
        parent[rb] = new
        size[new] = size[ra] + size[rb]
        lo, hi = (ra, rb) if ra < rb else (rb, ra)
        out[step, 0] = lo
        out[step, 1] = hi
        out[step, 2] = ws[step]
        out[step, 3] = size[new]
    return out


def layout_epoch(
    pos: np.ndarray,
    heads: np.ndarray,
    tails: np.ndarray,
    applied: np.ndarray,
    negatives: np.ndarray,
    lr: float,
    repulsion: float,
    clip: float,
) -> None:
    """One epoch of attractive/repulsive cross-entropy layout, in place.

    ``applied`` indexes the edges active this epoch; ``negatives`` holds the
    pre-drawn repulsion targets (one row per applied edge). Updates are
    accumulated per phase and added once so the result does not depend on
    internal vectorization.
    """
    delta = np.zeros_like(pos)
    hi = heads[applied]
    ti = tails[applied]
    dvec = pos[hi] - pos[ti]
    d2 = np.einsum("ij,ij->i", dvec, dvec)
    coeff = -2.0 / (1.0 + d2)
    grad = np.clip(coeff[:, None] * dvec, -clip, clip) * lr
    np.add.at(delta, hi, grad)
    np.subtract.at(delta, ti, grad)
    for col in range(negatives.shape[1]):
        nk = negatives[:, col]
        dvec = pos[hi] - pos[nk]
        d2 = np.einsum("ij,ij->i", dvec, dvec)
        coeff = 2.0 * repulsion / ((0.001 + d2) * (1.0 + d2))
        grad = np.clip(coeff[:, None] * dvec, -clip, clip) * lr
        np.add.at(delta, hi, grad)
    pos += delta
