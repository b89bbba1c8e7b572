"""Dense embedding matrices and the elementary vector operations built on them.

Embeddings are stored as 32-bit floats (row-major) to keep million-row
matrices affordable; dot products, norms, and the power iteration accumulate
in 64-bit to bound rounding error.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

SCAE_MAGIC = b"SCAE"
SCAE_VERSION = 1

# rows processed per block when upcasting f32 data to f64 for accumulation
_BLOCK_ROWS = 65536


class EmbeddingLoadError(ValueError):
    """Raised when an embedding file is malformed or contains bad values."""


class DegenerateVectorError(ValueError):
    """Raised when an operation requires a nonzero vector but got ~0."""


class EmbeddingMatrix:
    """An n x dim matrix of document embeddings with cached row norms.

    The matrix is mutated in place during fitting (rows shrink as topic
    directions are removed), so row norms are maintained incrementally and
    refreshed periodically to stop drift.
    """

    def __init__(self, data: np.ndarray):
        data = np.ascontiguousarray(data, dtype=np.float32)
        if data.ndim != 2:
            raise ValueError(f"expected 2-d array, got shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"matrix must be at least 1x1, got {data.shape}")
        self.data = data
        self._norms: np.ndarray | None = None
        self._norm_updates = 0
        # rows that were all-zero on construction; these are never
        # clusterable and never decomposed
        self.zero_rows = np.flatnonzero(
            ~np.any(data, axis=1)
        ).astype(np.int64)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    @property
    def row_norms(self) -> np.ndarray:
        """Euclidean norm of every row, recomputed if stale."""
        if self._norms is None:
            self._norms = self._compute_norms()
        return self._norms

    def _compute_norms(self) -> np.ndarray:
        out = np.empty(self.n, dtype=np.float64)
        for start in range(0, self.n, _BLOCK_ROWS):
            block = self.data[start:start + _BLOCK_ROWS].astype(np.float64)
            out[start:start + _BLOCK_ROWS] = np.sqrt((block * block).sum(axis=1))
        return out

    def invalidate_norms(self) -> None:
        self._norms = None
        self._norm_updates = 0

    def update_norms_squared_delta(self, rows: np.ndarray, delta: np.ndarray) -> None:
        """Apply a known change of squared norms to the cached values.

        Every 64 incremental updates the cache is dropped and rebuilt to
        keep accumulated drift negligible.
        """
        if self._norms is None:
            return
        self._norm_updates += 1
        if self._norm_updates >= 64:
            self.invalidate_norms()
            return
        sq = self._norms[rows] ** 2 + delta
        self._norms[rows] = np.sqrt(np.maximum(sq, 0.0))

    def dot_all(self, v: np.ndarray) -> np.ndarray:
        """``data @ v`` with 64-bit accumulation, blockwise."""
        v64 = np.asarray(v, dtype=np.float64)
        out = np.empty(self.n, dtype=np.float64)
        for start in range(0, self.n, _BLOCK_ROWS):
            out[start:start + _BLOCK_ROWS] = (
                self.data[start:start + _BLOCK_ROWS].astype(np.float64) @ v64
            )
        return out

    def copy(self) -> "EmbeddingMatrix":
        return EmbeddingMatrix(self.data.copy())

    def __repr__(self) -> str:  # pragma: no cover
        return f"EmbeddingMatrix(n={self.n}, dim={self.dim})"


def _check_finite(data: np.ndarray) -> None:
    bad = ~np.isfinite(data)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise EmbeddingLoadError(
            f"non-finite value at row {int(row)}, column {int(col)}"
        )


def load_embeddings(path: str | Path, format: str = "binary") -> EmbeddingMatrix:
    """Load an embedding matrix from an SCAE binary or headerless CSV file."""
    path = Path(path)
    if not path.exists():
        raise EmbeddingLoadError(f"embedding file not found: {path}")
    if format == "binary":
        data = _read_scae(path)
    elif format == "csv":
        data = _read_csv(path)
    else:
        raise ValueError(f"unknown embedding format: {format!r}")
    _check_finite(data)
    return EmbeddingMatrix(data)


def _read_scae(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    header_size = 4 + 2 + 8 + 4
    if len(raw) < header_size:
        raise EmbeddingLoadError(f"{path}: truncated header")
    magic = raw[:4]
    if magic != SCAE_MAGIC:
        raise EmbeddingLoadError(f"{path}: bad magic bytes {magic!r}")
    (version,) = struct.unpack_from("<H", raw, 4)
    if version != SCAE_VERSION:
        raise EmbeddingLoadError(f"{path}: unsupported version {version}")
    (n,) = struct.unpack_from("<Q", raw, 6)
    (dim,) = struct.unpack_from("<I", raw, 14)
    if n < 1 or dim < 1:
        raise EmbeddingLoadError(f"{path}: header declares empty matrix {n}x{dim}")
    payload = raw[header_size:]
    expected = n * dim * 4
    if len(payload) != expected:
        got_rows = len(payload) // (dim * 4)
        raise EmbeddingLoadError(
            f"{path}: row count mismatch, header says {n} rows "
            f"but payload holds {got_rows}"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(n, dim)
    return data.astype(np.float32)


def _read_csv(path: Path) -> np.ndarray:
    rows: list[list[float]] = []
    width = None
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                values = [float(tok) for tok in line.split(",")]
            except ValueError as exc:
                raise EmbeddingLoadError(f"{path}:{lineno}: {exc}") from exc
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise EmbeddingLoadError(
                    f"{path}:{lineno}: expected {width} columns, got {len(values)}"
                )
            rows.append(values)
    if not rows:
        raise EmbeddingLoadError(f"{path}: empty csv")
    return np.asarray(rows, dtype=np.float32)


def save_embeddings(matrix: EmbeddingMatrix | np.ndarray, path: str | Path) -> None:
    """Write a matrix in the SCAE binary format (round-trips bit-exactly)."""
    data = matrix.data if isinstance(matrix, EmbeddingMatrix) else np.asarray(
        matrix, dtype=np.float32
    )
    n, dim = data.shape
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(SCAE_MAGIC)
        fh.write(struct.pack("<H", SCAE_VERSION))
        fh.write(struct.pack("<Q", n))
        fh.write(struct.pack("<I", dim))
        fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def cosine_similarity(x: np.ndarray, v: np.ndarray) -> float:
    """Cosine of the angle between two vectors, clamped to [-1, 1]."""
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nx = float(np.linalg.norm(x))
    nv = float(np.linalg.norm(v))
    if nx == 0.0 or nv == 0.0:
        raise DegenerateVectorError("cosine similarity of a zero-norm vector")
    return float(np.clip(float(x @ v) / (nx * nv), -1.0, 1.0))


def spectral_norm(
    matrix: EmbeddingMatrix | np.ndarray,
    tol: float = 1e-6,
    max_iter: int = 200,
    seed: int = 0,
) -> float:
    """Largest singular value estimated by power iteration on ``m.T @ m``.

    Scales to tall matrices because only matrix-vector products are formed.
    A zero matrix returns 0. The starting vector is drawn from a fixed seed
    so repeated calls agree exactly.
    """
    if isinstance(matrix, EmbeddingMatrix):
        data = matrix.data
    else:
        data = np.asarray(matrix)
    n, dim = data.shape
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(dim)
    zn = np.linalg.norm(z)
    if zn == 0.0:  # pragma: no cover
        z = np.ones(dim)
        zn = np.linalg.norm(z)
    z /= zn
    sigma = 0.0
    for _ in range(max_iter):
        w = _matvec(data, z)
        y = _rmatvec(data, w)
        yn = np.linalg.norm(y)
        if yn == 0.0:
            return 0.0
        new_sigma = float(np.sqrt(yn))
        z = y / yn
        if sigma > 0.0 and abs(new_sigma - sigma) <= tol * sigma:
            sigma = new_sigma
            break
        sigma = new_sigma
    return sigma


def frobenius_norm(matrix: EmbeddingMatrix | np.ndarray) -> float:
    data = matrix.data if isinstance(matrix, EmbeddingMatrix) else np.asarray(matrix)
    total = 0.0
    for start in range(0, data.shape[0], _BLOCK_ROWS):
        block = data[start:start + _BLOCK_ROWS].astype(np.float64)
        total += float((block * block).sum())
    return float(np.sqrt(total))


def _matvec(data: np.ndarray, z: np.ndarray) -> np.ndarray:
    out = np.empty(data.shape[0], dtype=np.float64)
    for start in range(0, data.shape[0], _BLOCK_ROWS):
        out[start:start + _BLOCK_ROWS] = (
            data[start:start + _BLOCK_ROWS].astype(np.float64) @ z
        )
    return out


def _rmatvec(data: np.ndarray, w: np.ndarray) -> np.ndarray:
    out = np.zeros(data.shape[1], dtype=np.float64)
    for start in range(0, data.shape[0], _BLOCK_ROWS):
        block = data[start:start + _BLOCK_ROWS].astype(np.float64)
        out += block.T @ w[start:start + _BLOCK_ROWS]
    return out
