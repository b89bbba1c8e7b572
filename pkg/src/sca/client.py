"""HTTP client for an external embedding service.

The service contract is ``POST {"texts": [...]}`` returning
``{"embeddings": [[...], ...]}``. Requests go out in batches with bounded
retry; the assembled matrix preserves input order and is validated for a
uniform dimension and finite values.
"""

from __future__ import annotations

import time

import numpy as np
import requests

from .embeddings import EmbeddingMatrix


class EmbeddingServiceError(RuntimeError):
    """The embedding service failed or returned an inconsistent payload."""


def fetch_embeddings(
    endpoint: str,
    texts: list[str],
    batch_size: int = 64,
    max_attempts: int = 3,
    timeout: float = 30.0,
    bearer_token: str | None = None,
    backoff: float = 0.5,
) -> EmbeddingMatrix:
    if not texts:
        raise EmbeddingServiceError("no texts to embed")
    headers = {"Content-Type": "application/json"}
    if bearer_token:
        headers["Authorization"] = f"Bearer {bearer_token}"
    rows: list[list[float]] = []
    dim: int | None = None
    for batch_index, start in enumerate(range(0, len(texts), batch_size)):
        batch = texts[start:start + batch_size]
        payload = _post_batch(
            endpoint, batch, headers, max_attempts, timeout, backoff, batch_index
        )
        if len(payload) != len(batch):
            raise EmbeddingServiceError(
                f"batch {batch_index}: row count mismatch, sent {len(batch)} "
                f"texts, got {len(payload)} embeddings"
            )
        for row in payload:
            if dim is None:
                dim = len(row)
            elif len(row) != dim:
                raise EmbeddingServiceError(
                    f"batch {batch_index}: dimension drift, expected {dim}, "
                    f"got {len(row)}"
                )
        rows.extend(payload)
    data = np.asarray(rows, dtype=np.float32)
    if not np.all(np.isfinite(data)):
        raise EmbeddingServiceError("service returned non-finite values")
    return EmbeddingMatrix(data)


def _post_batch(
    endpoint: str,
    batch: list[str],
    headers: dict[str, str],
    max_attempts: int,
    timeout: float,
    backoff: float,
    batch_index: int,
) -> list[list[float]]:
    last_error = "no attempt made"
    for attempt in range(max_attempts):
        try:
            response = requests.post(
                endpoint, json={"texts": batch}, headers=headers, timeout=timeout
            )
            if response.status_code == 200:
                body = response.json()
                if "embeddings" not in body:
                    raise EmbeddingServiceError(
                        f"batch {batch_index}: response lacks 'embeddings'"
                    )
                return body["embeddings"]
            last_error = f"HTTP {response.status_code}"
        except EmbeddingServiceError:
            raise
        except (requests.RequestException, ValueError) as exc:
            last_error = str(exc)
        if attempt + 1 < max_attempts:
            time.sleep(backoff * (2 ** attempt))
    raise EmbeddingServiceError(
        f"batch {batch_index}: giving up after {max_attempts} attempts "
        f"({last_error})"
    )
