"""Class-based TF-IDF token rankings and medoid exemplars for topics.

A topic's weight for token t is ``tf(t, c) * log(1 + A / f_t)`` where tf
counts t inside the concatenation of the topic's documents, f_t counts t
across all topics, and A is the average token count per topic. The top ten
tokens (weight-descending, ties alphabetical) represent the topic; the
medoid is the member document closest to the topic centroid by cosine.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .text import DocumentCorpus, Vocabulary

logger = logging.getLogger(__name__)

TOP_K = 10


@dataclass
class TopicRepresentation:
    topic_id: int
    top_tokens: list[str]
    token_weights: list[float]
    medoid_doc_id: str | None = None

    def token_set(self) -> frozenset[str]:
        return frozenset(self.top_tokens)


def class_token_counts(
    corpus: DocumentCorpus, labels: np.ndarray, vocab: Vocabulary
) -> tuple[list[int], np.ndarray]:
    """Token count matrix (classes x vocabulary) over non-noise documents."""
    labels = np.asarray(labels)
    classes = sorted(int(c) for c in np.unique(labels) if c >= 0)
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(vocab)), dtype=np.float64)
    for doc, label in enumerate(labels):
        if label < 0:
            continue
        row = index[int(label)]
        for tok in corpus.tokens[doc]:
            col = vocab.token_to_index.get(tok)
            if col is not None:
                counts[row, col] += 1.0
    return classes, counts


def ctfidf_weights(
    corpus: DocumentCorpus, labels: np.ndarray, vocab: Vocabulary
) -> tuple[list[int], np.ndarray]:
    """Per-class token weights; returns (class ids, classes x vocab matrix)."""
    classes, tf = class_token_counts(corpus, labels, vocab)
    if not classes:
        return classes, np.zeros((0, len(vocab)))
    empty = np.flatnonzero(tf.sum(axis=1) == 0)
    for row in empty:
        logger.warning("class %d has no vocabulary tokens", classes[row])
    f_t = tf.sum(axis=0)
    avg_per_class = tf.sum() / len(classes)
    with np.errstate(divide="ignore", invalid="ignore"):
        idf = np.log1p(np.where(f_t > 0, avg_per_class / f_t, 0.0))
    return classes, tf * idf


def top_tokens(
    weights_row: np.ndarray, vocab: Vocabulary, k: int = TOP_K
) -> tuple[list[str], list[float]]:
    """The k heaviest tokens of one class; ties break alphabetically."""
    positive = np.flatnonzero(weights_row > 0)
    ranked = sorted(positive, key=lambda i: (-weights_row[i], vocab.tokens[i]))[:k]
    return [vocab.tokens[i] for i in ranked], [float(weights_row[i]) for i in ranked]


def medoid(member_rows: np.ndarray, centroid: np.ndarray) -> int:
    """Index (within members) of the row most cosine-similar to the centroid.

    Zero-norm rows never win unless every row is zero, in which case the
    first row is returned.
    """
    member_rows = np.asarray(member_rows, dtype=np.float64)
    centroid = np.asarray(centroid, dtype=np.float64)
    norms = np.linalg.norm(member_rows, axis=1) * np.linalg.norm(centroid)
    sims = np.full(member_rows.shape[0], -np.inf)
    ok = norms > 0
    sims[ok] = (member_rows[ok] @ centroid) / norms[ok]
    return int(np.argmax(sims)) if ok.any() else 0


def render_topic_table_markdown(rows: list[dict]) -> str:
    """Topic table in the id / size / tokens / medoid layout."""
    lines = ["| ID | N | Top tokens | Medoid |", "| --- | --- | --- | --- |"]
    for row in rows:
        tokens = ", ".join(row["tokens"])
        medoid_text = (row.get("medoid_text") or "").replace("|", "\\|")
        lines.append(f"| {row['id']} | {row['size']} | {tokens} | {medoid_text} |")
    return "\n".join(lines) + "\n"
