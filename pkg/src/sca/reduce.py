"""Dimensionality reduction ahead of density clustering.

Three interchangeable reducers: ``identity`` (no-op), ``pca`` (deterministic
linear reference), and ``graph_layout`` (neighborhood-graph embedding in the
style of manifold layout methods: per-point calibrated edge weights,
probabilistic-union symmetrization, attractive/repulsive SGD).

The cosine metric is realized by L2-normalizing rows and then working with
plain Euclidean machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from . import _kernels
from .embeddings import EmbeddingMatrix
from .errors import ConfigurationError
from .neighbors import EXACT_THRESHOLD, knn_search

_SIGMA_TOL = 1e-5
_SIGMA_ITER = 64

_LAYOUT_LEARNING_RATE = 1.0
_LAYOUT_CLIP = 4.0
_LAYOUT_REPULSION = 1.0
_LAYOUT_NEGATIVE_RATE = 5
_LAYOUT_INIT_SPREAD = 5.0


@dataclass
class ReducerConfig:
    kind: str = "pca"  # identity | pca | graph_layout
    target_dim: int = 5
    metric: str = "cosine"  # cosine | euclidean
    n_neighbors: int = 15
    layout_epochs: int = 200
    seed: int = 0

    def validate(self, n: int, dim: int) -> None:
        if self.kind not in ("identity", "pca", "graph_layout"):
            raise ConfigurationError(f"unknown reducer kind {self.kind!r}")
        if self.metric not in ("cosine", "euclidean"):
            raise ConfigurationError(f"unknown reducer metric {self.metric!r}")
        if self.kind == "identity":
            return
        if not (2 <= self.target_dim < dim):
            raise ConfigurationError(
                f"target_dim must be in [2, {dim}), got {self.target_dim}"
            )
        if n <= self.target_dim:
            raise ConfigurationError(
                f"need more than target_dim={self.target_dim} points, got {n}"
            )
        if self.kind == "graph_layout" and self.n_neighbors >= n:
            raise ConfigurationError(
                f"n_neighbors={self.n_neighbors} must be smaller than n={n}"
            )


def fit_transform(
    embeddings: EmbeddingMatrix,
    config: ReducerConfig,
    exact_threshold: int = EXACT_THRESHOLD,
) -> EmbeddingMatrix:
    """Map the matrix to ``target_dim`` dimensions per the configured reducer."""
    config.validate(embeddings.n, embeddings.dim)
    if config.kind == "identity":
        return embeddings.copy()
    prepared = _prepare(embeddings.data, config.metric)
    if config.kind == "pca":
        reduced = _pca(prepared, config.target_dim)
    else:
        reduced = _graph_layout(prepared, config, exact_threshold)
    if not np.all(np.isfinite(reduced)):  # pragma: no cover
        raise RuntimeError("reducer produced non-finite coordinates")
    return EmbeddingMatrix(reduced.astype(np.float32))


def _prepare(data: np.ndarray, metric: str) -> np.ndarray:
    out = data.astype(np.float64)
    if metric == "cosine":
        norms = np.linalg.norm(out, axis=1)
        nonzero = norms > 0.0
        out[nonzero] /= norms[nonzero, None]
    return out


def _pca(data: np.ndarray, target_dim: int) -> np.ndarray:
    mean = data.mean(axis=0)
    centered = data - mean
    cov = centered.T @ centered
    _, vecs = np.linalg.eigh(cov)
    comps = vecs[:, ::-1][:, :target_dim].T
    # canonical sign: largest-magnitude loading is positive
    for row in comps:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0.0:
            row *= -1.0
    return centered @ comps.T


def pca_reconstruction_error(data: np.ndarray, target_dim: int) -> float:
    """Mean squared distance between points and their rank-k projection."""
    data = np.asarray(data, dtype=np.float64)
    mean = data.mean(axis=0)
    centered = data - mean
    cov = centered.T @ centered
    _, vecs = np.linalg.eigh(cov)
    comps = vecs[:, ::-1][:, :target_dim]
    recon = (centered @ comps) @ comps.T
    return float(np.mean((centered - recon) ** 2))


def _calibrate_sigmas(dists: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-point bandwidths so each point's edge weights sum to log2(k).

    Weights are exp(-(d - d_min)/sigma) with d_min the nearest-neighbor
    distance, so the closest edge always carries weight 1. The binary
    search runs vectorized over all still-unconverged points.
    """
    n = dists.shape[0]
    target = math.log2(k)
    rho = dists[:, 0].copy()
    shifted = np.maximum(dists - rho[:, None], 0.0)
    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    mid = np.ones(n)
    done = np.zeros(n, dtype=bool)
    for _ in range(_SIGMA_ITER):
        active = ~done
        if not active.any():
            break
        sums = np.exp(-shifted[active] / mid[active, None]).sum(axis=1)
        idx = np.flatnonzero(active)
        converged = np.abs(sums - target) < _SIGMA_TOL
        done[idx[converged]] = True
        rest = idx[~converged]
        too_big = sums[~converged] > target
        big = rest[too_big]
        hi[big] = mid[big]
        mid[big] = (lo[big] + hi[big]) / 2.0
        small = rest[~too_big]
        lo[small] = mid[small]
        unbounded = np.isinf(hi[small])
        mid[small] = np.where(
            unbounded, mid[small] * 2.0, (lo[small] + hi[small]) / 2.0
        )
    return mid, rho


def _symmetrize(idx: np.ndarray, w: np.ndarray, n: int):
    """Probabilistic union of the directed weight graph.

    Returns undirected edges (heads, tails, weights) with heads < tails and
    combined weight a + b - a*b.
    """
    k = idx.shape[1]
    rows = np.repeat(np.arange(n, dtype=np.int64), k)
    cols = idx.reshape(-1).astype(np.int64)
    vals = w.reshape(-1)
    keep = cols >= 0
    rows, cols, vals = rows[keep], cols[keep], vals[keep]
    lo = np.minimum(rows, cols)
    hi = np.maximum(rows, cols)
    key = lo * n + hi
    order = np.argsort(key, kind="stable")
    key, rows, vals = key[order], rows[order], vals[order]
    uniq, start = np.unique(key, return_index=True)
    heads = (uniq // n).astype(np.int64)
    tails = (uniq % n).astype(np.int64)
    weights = np.zeros(uniq.shape[0])
    counts = np.diff(np.append(start, key.shape[0]))
    first = vals[start]
    weights[:] = first
    two = counts == 2
    second = vals[np.minimum(start + 1, key.shape[0] - 1)]
    weights[two] = first[two] + second[two] - first[two] * second[two]
    return heads, tails, weights


def _graph_layout(
    data: np.ndarray, config: ReducerConfig, exact_threshold: int
) -> np.ndarray:
    n = data.shape[0]
    k = config.n_neighbors
    rng = np.random.default_rng(config.seed)
    idx, dists = knn_search(data, k, seed=config.seed, exact_threshold=exact_threshold)
    sigma, rho = _calibrate_sigmas(dists, k)
    w = np.exp(-np.maximum(dists - rho[:, None], 0.0) / sigma[:, None])
    heads, tails, weights = _symmetrize(idx, w, n)

    pos = rng.uniform(-_LAYOUT_INIT_SPREAD, _LAYOUT_INIT_SPREAD,
                      (n, config.target_dim))
    epochs = config.layout_epochs
    eps_per_sample = weights.max() / np.maximum(weights, 1e-12)
    next_due = eps_per_sample.copy()
    for epoch in range(1, epochs + 1):
        applied = np.flatnonzero(next_due <= epoch)
        if applied.size:
            next_due[applied] += eps_per_sample[applied]
            negatives = rng.integers(0, n, size=(applied.size, _LAYOUT_NEGATIVE_RATE))
            lr = _LAYOUT_LEARNING_RATE * (1.0 - (epoch - 1) / epochs)
            _kernels.layout_epoch(
                pos, heads, tails, applied.astype(np.int64),
                negatives.astype(np.int64), lr, _LAYOUT_REPULSION, _LAYOUT_CLIP,
            )
    return pos
