"""Synthetic corpora with planted multi-topic structure, and recovery scoring.

Every planted topic is a unit direction in embedding space with its own
disjoint token vocabulary. A document samples one or more topics, mixes the
directions with positive coefficients, adds isotropic Gaussian noise, and
draws its tokens from the owning topics' vocabularies. ``noise_sigma`` is
the root-mean-square Euclidean norm of a document's noise vector (the
per-coordinate deviation is ``noise_sigma / sqrt(dim)``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embeddings import EmbeddingMatrix
from .errors import ConfigurationError
from .evaluation import ground_truth_scores
from .text import DocumentCorpus


@dataclass
class SynthSpec:
    n_docs: int
    dim: int
    n_topics: int
    topics_per_doc: tuple[int, int] = (1, 3)
    coefficient_range: tuple[float, float] = (0.5, 1.5)
    noise_sigma: float = 0.0
    tokens_per_topic: int = 20
    tokens_per_doc: int = 8
    seed: int = 0
    # probability weights over topic counts lo..hi; uniform when omitted
    topic_count_weights: tuple[float, ...] | None = None
    # 0 gives orthonormal directions; larger values tilt each direction
    # toward a shared axis so components overlap (superposition regime)
    direction_correlation: float = 0.0

    def validate(self) -> None:
        if self.n_topics > self.dim:
            raise ConfigurationError("n_topics cannot exceed dim")
        lo, hi = self.topics_per_doc
        if not (1 <= lo <= hi <= self.n_topics):
            raise ConfigurationError(
                f"topics_per_doc range {self.topics_per_doc} invalid for "
                f"K={self.n_topics}"
            )
        if self.noise_sigma < 0:
            raise ConfigurationError("noise_sigma must be >= 0")
        if self.topic_count_weights is not None:
            if len(self.topic_count_weights) != hi - lo + 1:
                raise ConfigurationError(
                    "topic_count_weights must cover the topics_per_doc range"
                )
        if self.direction_correlation and self.n_topics + 1 > self.dim:
            raise ConfigurationError(
                "correlated directions need n_topics + 1 <= dim"
            )


@dataclass
class SynthData:
    corpus: DocumentCorpus
    embeddings: EmbeddingMatrix
    directions: np.ndarray  # n_topics x dim, unit rows
    topic_sets: list[tuple[int, ...]] = field(default_factory=list)

    def single_topic_mask(self) -> np.ndarray:
        return np.asarray([len(t) == 1 for t in self.topic_sets])


def _orthonormal_directions(rng: np.random.Generator, k: int, dim: int) -> np.ndarray:
    basis, _ = np.linalg.qr(rng.standard_normal((dim, k)))
    dirs = basis.T.copy()
    for row in dirs:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    return dirs


def generate(spec: SynthSpec) -> SynthData:
    """Build the corpus, embeddings, and ground truth for one spec."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    k, dim = spec.n_topics, spec.dim
    if spec.direction_correlation:
        base = _orthonormal_directions(rng, k + 1, dim)
        shared = base[-1]
        dirs = base[:-1] + spec.direction_correlation * shared
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    else:
        dirs = _orthonormal_directions(rng, k, dim)

    vocab = [
        [f"topic{t:02d}tok{j:02d}" for j in range(spec.tokens_per_topic)]
        for t in range(k)
    ]
    lo, hi = spec.topics_per_doc
    counts = np.arange(lo, hi + 1)
    if spec.topic_count_weights is not None:
        weights = np.asarray(spec.topic_count_weights, dtype=np.float64)
        weights = weights / weights.sum()
    else:
        weights = np.full(counts.size, 1.0 / counts.size)

    coeff_lo, coeff_hi = spec.coefficient_range
    per_coord_sigma = spec.noise_sigma / np.sqrt(dim)

    data = np.zeros((spec.n_docs, dim), dtype=np.float64)
    topic_sets: list[tuple[int, ...]] = []
    ids: list[str] = []
    texts: list[str] = []
    labels: list[str] = []
    for doc in range(spec.n_docs):
        count = int(rng.choice(counts, p=weights))
        topics = tuple(sorted(int(t) for t in rng.choice(k, size=count, replace=False)))
        coeffs = rng.uniform(coeff_lo, coeff_hi, size=count)
        row = coeffs @ dirs[list(topics)]
        if spec.noise_sigma > 0:
            row = row + rng.standard_normal(dim) * per_coord_sigma
        data[doc] = row
        topic_sets.append(topics)
        pool = [tok for t in topics for tok in vocab[t]]
        chosen = rng.choice(len(pool), size=spec.tokens_per_doc, replace=True)
        texts.append(" ".join(pool[int(c)] for c in chosen))
        ids.append(f"doc{doc:06d}")
        labels.append("+".join(str(t) for t in topics))

    corpus = DocumentCorpus.from_texts(ids, texts, labels=labels)
    return SynthData(
        corpus=corpus,
        embeddings=EmbeddingMatrix(data.astype(np.float32)),
        directions=dirs,
        topic_sets=topic_sets,
    )


def match_directions(
    directions: np.ndarray, component_vectors: np.ndarray
) -> list[tuple[int, int, float]]:
    """Greedy one-to-one matching by descending absolute cosine.

    Returns (direction index, component index, |cosine|) triples; directions
    stay unmatched when there are fewer components.
    """
    if component_vectors.shape[0] == 0:
        return []
    dirs = directions / np.linalg.norm(directions, axis=1, keepdims=True)
    comps = component_vectors / np.linalg.norm(
        component_vectors, axis=1, keepdims=True
    )
    sims = np.abs(dirs @ comps.T)
    pairs = sorted(
        ((i, j) for i in range(sims.shape[0]) for j in range(sims.shape[1])),
        key=lambda p: (-sims[p], p),
    )
    used_dir: set[int] = set()
    used_comp: set[int] = set()
    matches: list[tuple[int, int, float]] = []
    for i, j in pairs:
        if i in used_dir or j in used_comp:
            continue
        used_dir.add(i)
        used_comp.add(j)
        matches.append((i, j, float(sims[i, j])))
        if len(used_dir) == sims.shape[0]:
            break
    return matches


def score_recovery(
    model,
    directions: np.ndarray,
    topic_sets: list[tuple[int, ...]],
    embeddings: EmbeddingMatrix | None = None,
    cosine_threshold: float = 0.9,
) -> dict[str, float]:
    """How well a fitted model recovered the planted structure.

    Direction recall counts planted directions whose greedily matched
    component exceeds the |cosine| threshold. Ground-truth scores compare
    per-document predictions against the planted topic of single-topic
    documents, using top-1 activations when embeddings are given and the
    first cluster assignment otherwise.
    """
    from .engine import transform_batch
    from .evaluation import primary_topic_labels

    reps = model.representatives()
    vectors = (
        np.stack([c.vector for c in reps]) if reps else np.zeros((0, directions.shape[1]))
    )
    matches = match_directions(directions, vectors.astype(np.float64))
    matched_cos = {i: cos for i, _, cos in matches}
    k = directions.shape[0]
    recall = sum(1 for i in range(k) if matched_cos.get(i, 0.0) > cosine_threshold) / k
    mean_cos = sum(matched_cos.get(i, 0.0) for i in range(k)) / k

    single = np.asarray([len(t) == 1 for t in topic_sets])
    out = {"direction_recall": float(recall), "mean_best_cosine": float(mean_cos)}
    if not single.any():
        return out
    true = np.asarray(
        [t[0] for t, is_single in zip(topic_sets, single) if is_single]
    )
    if embeddings is not None and model.components:
        acts = transform_batch(embeddings.data[single], model)
        best = np.argmax(np.abs(acts), axis=1)
        predicted = np.asarray([model.resolve(int(b)) for b in best])
        predicted[np.abs(acts).max(axis=1) == 0.0] = -1
    elif model.cluster_assignments and len(model.cluster_assignments[0]) == len(
        topic_sets
    ):
        predicted = primary_topic_labels(model)[single]
    else:
        return out
    out.update(ground_truth_scores(predicted, true))
    return out
