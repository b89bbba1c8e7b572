"""Run statistics: noise, diversity, overlaps, coherence, ground-truth scores.

Coherence probabilities are document-level occurrence frequencies: p(w) is
the fraction of documents containing w, p(w, w') the fraction containing
both. Pair scores average over all unordered token pairs of a topic's
top-ten list, then over topics.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, asdict

import numpy as np

from .errors import ConfigurationError
from .text import DocumentCorpus

logger = logging.getLogger(__name__)

NPMI_EPSILON = 1e-12
NOISE = -1


@dataclass
class RunMetrics:
    n_components: int = 0
    n_components_first_iter: int = 0
    n_clusters: int = 0
    n_merged: int = 0
    noise_rate: float = 0.0
    noise_rate_first_iter: float = 0.0
    topic_diversity: float | None = None
    topic_diversity_first_iter: float | None = None
    npmi: float | None = None
    npmi_first_iter: float | None = None
    cv: float | None = None
    cv_first_iter: float | None = None
    avg_max_sample_overlap: float | None = None
    avg_max_token_overlap_count: float | None = None
    avg_max_token_overlap_jaccard: float | None = None
    purity: float | None = None
    ari: float | None = None
    nmi: float | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, payload: str) -> "RunMetrics":
        return cls(**json.loads(payload))


def noise_rate(labels: np.ndarray) -> float:
    """Fraction of documents carrying the noise label."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("noise_rate of an empty label vector")
    return float(np.count_nonzero(labels == NOISE) / labels.size)


def overall_noise_rate(assignments: list[np.ndarray]) -> float:
    """Fraction of documents that are noise in every iteration."""
    if not assignments:
        raise ValueError("no assignments")
    never = np.ones(len(assignments[0]), dtype=bool)
    for labels in assignments:
        never &= np.asarray(labels) == NOISE
    return float(never.sum() / never.size)


def topic_diversity(representations: list[list[str]]) -> float:
    """Unique top tokens over total top tokens across all topics."""
    reprs = [r for r in representations if r]
    if not reprs:
        raise ValueError("topic_diversity needs at least one representation")
    total = sum(len(r) for r in reprs)
    unique = len(set().union(*map(set, reprs)))
    return unique / total


def sample_overlap(c1: set[int], c2: set[int]) -> float:
    """Jaccard overlap of two document-id sets (0 when both empty)."""
    union = len(c1 | c2)
    if union == 0:
        return 0.0
    return len(c1 & c2) / union


def avg_max_sample_overlap(
    later_clusters: list[set[int]], hierarchy_nodes
) -> float | None:
    """Mean best Jaccard of each later cluster against every hierarchy node."""
    if not later_clusters:
        return None
    node_sets = [set(int(p) for p in node.members) for node in hierarchy_nodes]
    if not node_sets:
        return None
    total = 0.0
    for cluster in later_clusters:
        total += max(sample_overlap(cluster, node) for node in node_sets)
    return total / len(later_clusters)


def avg_max_token_overlap(
    later_reprs: list[list[str]], first_reprs: list[list[str]]
) -> tuple[float, float] | None:
    """Mean best shared-token count (and Jaccard) vs first-iteration topics."""
    later = [set(r) for r in later_reprs if r]
    first = [set(r) for r in first_reprs if r]
    if not later or not first:
        return None
    count_total = 0.0
    jaccard_total = 0.0
    for rep in later:
        count_total += max(len(rep & f) for f in first)
        jaccard_total += max(
            len(rep & f) / len(rep | f) if rep | f else 0.0 for f in first
        )
    return count_total / len(later), jaccard_total / len(later)


def _doc_occurrence(corpus: DocumentCorpus, tokens: set[str]) -> dict[str, set[int]]:
    occurrence: dict[str, set[int]] = {tok: set() for tok in tokens}
    for doc, doc_tokens in enumerate(corpus.tokens):
        for tok in set(doc_tokens) & tokens:
            occurrence[tok].add(doc)
    return occurrence


def npmi_pair(p_r: float, p_s: float, p_joint: float) -> float:
    """Smoothed normalized pointwise mutual information of one token pair.

    When a marginal is zero the probability ratio is undefined; such pairs
    contribute the floor value -1.
    """
    if p_r == 0.0 or p_s == 0.0:
        return -1.0
    num = math.log2((p_joint + NPMI_EPSILON) / (p_r * p_s))
    den = -math.log2(p_joint + NPMI_EPSILON)
    return num / den


def _pair_scores(
    representations: list[list[str]],
    corpus: DocumentCorpus,
    measure,
    window: str,
) -> float | None:
    if window != "document":
        raise ConfigurationError(f"unsupported coherence window {window!r}")
    reprs = [r for r in representations if len(r) >= 2]
    if not reprs:
        return None
    n = len(corpus)
    vocab = set()
    for r in reprs:
        vocab.update(r)
    occurrence = _doc_occurrence(corpus, vocab)
    missing = sorted(tok for tok in vocab if not occurrence[tok])
    if missing:
        logger.warning(
            "%d representation tokens absent from corpus (floor value used): %s",
            len(missing), ", ".join(missing[:5]),
        )
    topic_means = []
    for r in reprs:
        scores = []
        for j in range(1, len(r)):
            for i in range(j):
                docs_r = occurrence[r[i]]
                docs_s = occurrence[r[j]]
                score = measure(
                    len(docs_r) / n,
                    len(docs_s) / n,
                    len(docs_r & docs_s) / n,
                )
                scores.append(score)
        topic_means.append(sum(scores) / len(scores))
    return float(sum(topic_means) / len(topic_means))


def npmi_coherence(
    representations: list[list[str]],
    corpus: DocumentCorpus,
    window: str = "document",
) -> float | None:
    return _pair_scores(representations, corpus, npmi_pair, window)


def cv_coherence(
    representations: list[list[str]],
    corpus: DocumentCorpus,
    gamma: float = 2.0,
    window: str = "document",
) -> float | None:
    """Sign-preserving gamma power of the pairwise NPMI, same averaging."""

    def measure(p_r: float, p_s: float, p_joint: float) -> float:
        value = npmi_pair(p_r, p_s, p_joint)
        return math.copysign(abs(value) ** gamma, value)

    return _pair_scores(representations, corpus, measure, window)


def _contingency(predicted: np.ndarray, true: np.ndarray):
    pred_ids, pred_idx = np.unique(predicted, return_inverse=True)
    true_ids, true_idx = np.unique(true, return_inverse=True)
    table = np.zeros((pred_ids.size, true_ids.size), dtype=np.int64)
    np.add.at(table, (pred_idx, true_idx), 1)
    return table


def _comb2(x: np.ndarray) -> np.ndarray:
    return x * (x - 1) / 2.0


def ground_truth_scores(predicted, true) -> dict[str, float]:
    """Purity, adjusted Rand index, and normalized mutual information.

    The noise label is treated as an ordinary predicted class. NMI uses the
    arithmetic mean of the two entropies as normalizer.
    """
    predicted = np.asarray(predicted)
    true = np.asarray(true)
    if predicted.shape != true.shape:
        raise ValueError(
            f"label vectors differ in length: {predicted.shape} vs {true.shape}"
        )
    n = predicted.size
    if n == 0:
        raise ValueError("empty label vectors")
    table = _contingency(predicted, true)
    purity = float(table.max(axis=1).sum() / n)

    a = table.sum(axis=1).astype(np.float64)
    b = table.sum(axis=0).astype(np.float64)
    index = float(_comb2(table.astype(np.float64)).sum())
    sum_a = float(_comb2(a).sum())
    sum_b = float(_comb2(b).sum())
    total = _comb2(np.asarray([float(n)]))[0]
    expected = sum_a * sum_b / total if total > 0 else 0.0
    max_index = (sum_a + sum_b) / 2.0
    if max_index == expected:
        ari = 1.0
    else:
        ari = (index - expected) / (max_index - expected)

    pa = a / n
    pb = b / n
    h_pred = float(-np.sum(pa[pa > 0] * np.log(pa[pa > 0])))
    h_true = float(-np.sum(pb[pb > 0] * np.log(pb[pb > 0])))
    joint = table / n
    mask = joint > 0
    outer = np.outer(pa, pb)
    mi = float(np.sum(joint[mask] * np.log(joint[mask] / outer[mask])))
    if h_pred == 0.0 and h_true == 0.0:
        nmi = 1.0
    else:
        mean_h = (h_pred + h_true) / 2.0
        nmi = mi / mean_h if mean_h > 0 else 0.0
    return {"purity": purity, "ari": float(ari), "nmi": float(nmi)}


def restrict_to_top_k(predicted: np.ndarray, k: int) -> np.ndarray:
    """Keep the k largest predicted classes, remapping the rest to noise."""
    predicted = np.asarray(predicted).copy()
    ids, counts = np.unique(predicted[predicted != NOISE], return_counts=True)
    order = sorted(range(ids.size), key=lambda i: (-counts[i], ids[i]))
    keep = set(int(ids[i]) for i in order[:k])
    mask = np.array([int(x) not in keep for x in predicted])
    predicted[mask] = NOISE
    return predicted


def compute_run_metrics(
    model,
    corpus: DocumentCorpus | None = None,
    true_labels=None,
    top_k_restrict: int | None = None,
    cv_gamma: float = 2.0,
) -> RunMetrics:
    """Assemble the full statistics table for a fitted model."""
    metrics = RunMetrics()
    reps = model.representatives()
    first = model.components_of_iteration(1)
    metrics.n_components = len(reps)
    metrics.n_components_first_iter = len(first)
    metrics.n_clusters = len(model.components)
    metrics.n_merged = len(model.components) - len(reps)
    if model.cluster_assignments:
        metrics.noise_rate_first_iter = noise_rate(model.cluster_assignments[0])
        metrics.noise_rate = overall_noise_rate(model.cluster_assignments)

    rep_tokens = [c.token_repr for c in reps if c.token_repr]
    first_tokens = [c.token_repr for c in first if c.token_repr]
    if rep_tokens:
        metrics.topic_diversity = topic_diversity(rep_tokens)
    if first_tokens:
        metrics.topic_diversity_first_iter = topic_diversity(first_tokens)
    if corpus is not None:
        if rep_tokens:
            metrics.npmi = npmi_coherence(rep_tokens, corpus)
            metrics.cv = cv_coherence(rep_tokens, corpus, gamma=cv_gamma)
        if first_tokens:
            metrics.npmi_first_iter = npmi_coherence(first_tokens, corpus)
            metrics.cv_first_iter = cv_coherence(first_tokens, corpus, gamma=cv_gamma)

    later_clusters = []
    for labels in model.cluster_assignments[1:]:
        labels = np.asarray(labels)
        for label in np.unique(labels[labels >= 0]):
            later_clusters.append(set(map(int, np.flatnonzero(labels == label))))
    if model.first_iteration_hierarchy is not None and later_clusters:
        metrics.avg_max_sample_overlap = avg_max_sample_overlap(
            later_clusters, model.first_iteration_hierarchy.hierarchy
        )
    later_tokens = [
        c.token_repr for c in model.components if c.iteration > 1 and c.token_repr
    ]
    overlap = avg_max_token_overlap(later_tokens, first_tokens)
    if overlap is not None:
        metrics.avg_max_token_overlap_count = overlap[0]
        metrics.avg_max_token_overlap_jaccard = overlap[1]

    if true_labels is not None:
        predicted = primary_topic_labels(model)
        if top_k_restrict is not None:
            predicted = restrict_to_top_k(predicted, top_k_restrict)
        true_ids = np.unique(np.asarray(true_labels), return_inverse=True)[1]
        scores = ground_truth_scores(predicted, true_ids)
        metrics.purity = scores["purity"]
        metrics.ari = scores["ari"]
        metrics.nmi = scores["nmi"]
    return metrics


def primary_topic_labels(model) -> np.ndarray:
    """One merged topic id per document: its earliest non-noise cluster."""
    n = len(model.cluster_assignments[0]) if model.cluster_assignments else 0
    out = np.full(n, NOISE, dtype=np.int64)
    for labels, mapping in zip(model.cluster_assignments, model.label_to_component):
        labels = np.asarray(labels)
        for doc in range(n):
            if out[doc] != NOISE:
                continue
            label = int(labels[doc])
            if label < 0:
                continue
            comp = mapping[label]
            if comp is not None:
                out[doc] = model.resolve(comp)
    return out


def _fmt(value, digits: int = 3) -> str:
    if value is None:
        return "n/a"
    return f"{value:.{digits}f}"


def render_summary_markdown(metrics: RunMetrics, name: str = "run") -> str:
    """Compact comparison table: topics, noise, coherence, diversity."""
    lines = [
        f"| | {name} |",
        "| --- | --- |",
        f"| #Topics | {metrics.n_components} |",
        f"| Noise R. | {_fmt(metrics.noise_rate)} |",
        f"| NPMI | {_fmt(metrics.npmi)} |",
        f"| CV | {_fmt(metrics.cv)} |",
        f"| Topic D. | {_fmt(metrics.topic_diversity)} |",
    ]
    return "\n".join(lines) + "\n"


def render_run_stats_markdown(metrics: RunMetrics, config=None) -> str:
    """Full statistics layout including the first-iteration rows."""
    lines = ["| Statistic | Value |", "| --- | --- |"]
    if config is not None:
        lines += [
            f"| alpha | {config.alpha} |",
            f"| mu | {config.mu} |",
            f"| min_cluster_size | {config.cluster.min_cluster_size} |",
            f"| min_samples | {config.cluster.min_samples} |",
            f"| Overlap Threshold theta | {config.theta} |",
        ]
    lines += [
        f"| No. of Components (1st) | {metrics.n_components_first_iter} |",
        f"| No. of Components | {metrics.n_components} |",
        f"| No. of Clusters | {metrics.n_clusters} |",
        f"| Noise Rate (1st) | {_fmt(metrics.noise_rate_first_iter)} |",
        f"| Noise Rate | {_fmt(metrics.noise_rate)} |",
        f"| Avg. Maximum Sample Overlap | {_fmt(metrics.avg_max_sample_overlap)} |",
        f"| Avg. Maximum Token Overlap | {_fmt(metrics.avg_max_token_overlap_count)} |",
        f"| NPMI Coherence | {_fmt(metrics.npmi)} |",
        f"| CV Coherence | {_fmt(metrics.cv)} |",
        f"| Topic Diversity | {_fmt(metrics.topic_diversity)} |",
        f"| NPMI Coherence (1st) | {_fmt(metrics.npmi_first_iter)} |",
        f"| CV Coherence (1st) | {_fmt(metrics.cv_first_iter)} |",
        f"| Topic Div. (1st) | {_fmt(metrics.topic_diversity_first_iter)} |",
    ]
    return "\n".join(lines) + "\n"


def render_grid_matrix(
    title: str,
    alphas: list[float],
    mus: list[float],
    cells: dict[tuple[float, float], str],
) -> str:
    """One grid table with mu rows and alpha columns, matching the run grid."""
    header = "| mu/alpha | " + " | ".join(str(a) for a in alphas) + " |"
    divider = "| --- |" + " --- |" * len(alphas)
    lines = [f"**{title}**", "", header, divider]
    for mu in mus:
        row = [str(mu)]
        for alpha in alphas:
            row.append(cells.get((alpha, mu), "n/a"))
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"
