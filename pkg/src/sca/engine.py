"""The core fitting loop: reduce, cluster, represent, decompose, repeat.

Each iteration clusters the current residual matrix, turns every cluster
into a unit "semantic component" (its normalized centroid), and immediately
subtracts a mu-fraction of each row's projection onto that component from
every row whose cosine against it clears the alpha gate. Later iterations
therefore see what earlier components did not explain. Near-duplicate
topics are unified afterwards by token-list overlap.

A fitted model doubles as a linear transformation: a vector is mapped to
its sequence of gated activations along the components, leaving a residual.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .cluster import ClusterConfig, ClusterResult, HierarchyNode, build_hierarchy
from .embeddings import EmbeddingMatrix, frobenius_norm, spectral_norm
from .errors import ConfigurationError
from .reduce import ReducerConfig, fit_transform
from .representation import TOP_K, ctfidf_weights, medoid, top_tokens
from .text import DocumentCorpus, Vocabulary, build_vocabulary

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1

_DEGENERATE_NORM = 1e-9


class DegenerateClusterError(ValueError):
    """A cluster whose rows cancel out has no usable direction."""


@dataclass
class ScaConfig:
    alpha: float = 0.0  # decomposition gate: minimum cosine for removal
    mu: float = 1.0  # decomposition factor: fraction of projection removed
    theta: float = 0.5  # merge threshold on shared top-token fraction
    stop_fixed_iters: int = 10
    stop_window: int = 2
    stop_new_clusters: int = 5
    stop_residual_norm: float = 0.01
    residual_norm_mode: str = "spectral"  # spectral | frobenius
    cluster_order: str = "ascending_label"  # ascending_label | descending_size
    activation_threshold: float | None = None
    min_df: int = 2
    lowercase: bool = True
    seed: int = 0
    reducer: ReducerConfig = field(default_factory=ReducerConfig)
    cluster: ClusterConfig = field(
        default_factory=lambda: ClusterConfig(min_cluster_size=10, min_samples=10)
    )

    def validate(self) -> None:
        for name in ("alpha", "mu", "theta"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1], got {value}")
        if self.stop_fixed_iters < 1:
            raise ConfigurationError("stop_fixed_iters must be >= 1")
        if self.stop_window < 1:
            raise ConfigurationError("stop_window must be >= 1")
        if self.residual_norm_mode not in ("spectral", "frobenius"):
            raise ConfigurationError(
                f"unknown residual_norm_mode {self.residual_norm_mode!r}"
            )
        if self.cluster_order not in ("ascending_label", "descending_size"):
            raise ConfigurationError(f"unknown cluster_order {self.cluster_order!r}")
        self.cluster.validate()

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "mu": self.mu,
            "theta": self.theta,
            "stop_fixed_iters": self.stop_fixed_iters,
            "stop_window": self.stop_window,
            "stop_new_clusters": self.stop_new_clusters,
            "stop_residual_norm": self.stop_residual_norm,
            "residual_norm_mode": self.residual_norm_mode,
            "cluster_order": self.cluster_order,
            "activation_threshold": self.activation_threshold,
            "min_df": self.min_df,
            "lowercase": self.lowercase,
            "seed": self.seed,
            "reducer": {
                "kind": self.reducer.kind,
                "target_dim": self.reducer.target_dim,
                "metric": self.reducer.metric,
                "n_neighbors": self.reducer.n_neighbors,
                "layout_epochs": self.reducer.layout_epochs,
                "seed": self.reducer.seed,
            },
            "cluster": {
                "min_cluster_size": self.cluster.min_cluster_size,
                "min_samples": self.cluster.min_samples,
            },
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ScaConfig":
        reducer = ReducerConfig(**obj.get("reducer", {}))
        cluster = ClusterConfig(**obj.get("cluster", {}))
        kwargs = {
            k: v
            for k, v in obj.items()
            if k not in ("reducer", "cluster")
        }
        return cls(reducer=reducer, cluster=cluster, **kwargs)


@dataclass
class SemanticComponent:
    id: int
    iteration: int  # 1-based discovery iteration
    vector: np.ndarray  # unit direction, float32
    cluster_size: int
    token_repr: list[str] = field(default_factory=list)
    token_weights: list[float] = field(default_factory=list)
    merged_into: int | None = None
    medoid_doc_id: str | None = None


@dataclass
class IterationRecord:
    iteration: int
    clusters_found: int
    components_added: int
    residual_norm: float
    wall_time: float = 0.0  # informational only, not persisted


@dataclass
class ScaModel:
    config: ScaConfig
    components: list[SemanticComponent] = field(default_factory=list)
    cluster_assignments: list[np.ndarray] = field(default_factory=list)
    label_to_component: list[list[int | None]] = field(default_factory=list)
    iteration_log: list[IterationRecord] = field(default_factory=list)
    first_iteration_hierarchy: ClusterResult | None = None
    doc_ids: list[str] | None = None
    stop_reason: str | None = None

    @property
    def n_iterations(self) -> int:
        return len(self.iteration_log)

    def resolve(self, component_id: int) -> int:
        """Follow merge links to the representative component id."""
        comp = self.components[component_id]
        while comp.merged_into is not None:
            comp = self.components[comp.merged_into]
        return comp.id

    def representatives(self) -> list[SemanticComponent]:
        return [c for c in self.components if c.merged_into is None]

    def components_of_iteration(self, iteration: int) -> list[SemanticComponent]:
        return [c for c in self.components if c.iteration == iteration]


def compute_centroid(cluster_rows: np.ndarray) -> np.ndarray:
    """Unit-normalized mean of the member rows (64-bit accumulation)."""
    rows = np.asarray(cluster_rows, dtype=np.float64)
    if rows.shape[0] == 0:
        raise DegenerateClusterError("empty cluster")
    mean = rows.mean(axis=0)
    norm = float(np.linalg.norm(mean))
    if norm < _DEGENERATE_NORM:
        raise DegenerateClusterError(
            f"cluster centroid norm {norm:.2e} below {_DEGENERATE_NORM}"
        )
    return mean / norm


def decompose(
    residuals: EmbeddingMatrix, v: np.ndarray, mu: float, alpha: float
) -> int:
    """Remove mu times each gated row's projection onto v, in place.

    A row is gated when its cosine against v strictly exceeds alpha; the
    gate is the only membership test, so rows outside the originating
    cluster (noise included) are decomposed too. Zero rows never gate.
    Returns the number of rows changed.
    """
    v64 = np.asarray(v, dtype=np.float64)
    scores = residuals.dot_all(v64)
    norms = residuals.row_norms
    cos = np.zeros_like(scores)
    nonzero = norms > 0.0
    cos[nonzero] = scores[nonzero] / norms[nonzero]
    rows = np.flatnonzero(nonzero & (cos > alpha))
    if rows.size:
        coeff = (mu * scores[rows]).astype(np.float32)
        residuals.data[rows] -= coeff[:, None] * v64.astype(np.float32)[None, :]
        residuals.update_norms_squared_delta(
            rows, -(2.0 * mu - mu * mu) * scores[rows] ** 2
        )
    return int(rows.size)


def residual_norm(residuals: EmbeddingMatrix, config: ScaConfig) -> float:
    if config.residual_norm_mode == "frobenius":
        return frobenius_norm(residuals)
    return spectral_norm(residuals)


def _iteration_seed(base_seed: int, iteration: int) -> int:
    seq = np.random.SeedSequence(entropy=base_seed, spawn_key=(iteration,))
    return int(seq.generate_state(1)[0])


def _remap_hierarchy(result: ClusterResult, valid: np.ndarray) -> ClusterResult:
    """Rewrite hierarchy member indices from a row subset to full-matrix ids."""
    nodes = [
        HierarchyNode(
            id=node.id,
            parent=node.parent,
            lambda_birth=node.lambda_birth,
            lambda_death=node.lambda_death,
            members=valid[node.members],
            stability=node.stability,
        )
        for node in result.hierarchy
    ]
    return ClusterResult(labels=result.labels, hierarchy=nodes)


def run_iteration(
    residuals: EmbeddingMatrix,
    model: ScaModel,
    corpus: DocumentCorpus | None = None,
    vocab: Vocabulary | None = None,
) -> int:
    """One reduce/cluster/represent/decompose pass over the residuals.

    Returns the number of clusters found (degenerate ones included, since
    they still evidence clustering activity for the stopping rule).
    """
    config = model.config
    iteration = model.n_iterations + 1
    started = time.perf_counter()

    n = residuals.n
    excluded = residuals.zero_rows
    if excluded.size:
        valid = np.setdiff1d(np.arange(n, dtype=np.int64), excluded)
    else:
        valid = None

    if valid is not None and valid.size == 0:
        # nothing clusterable: every row was zero on load
        labels = np.full(n, -1, dtype=np.int64)
        hierarchy_result = ClusterResult(labels=labels.copy())
    else:
        reducer_cfg = replace(
            config.reducer, seed=_iteration_seed(config.seed, iteration)
        )
        subset = (
            residuals if valid is None else EmbeddingMatrix(residuals.data[valid])
        )
        reduced = fit_transform(subset, reducer_cfg)
        result = build_hierarchy(reduced.data, config.cluster)
        if valid is None:
            labels = result.labels.copy()
            hierarchy_result = result
        else:
            labels = np.full(n, -1, dtype=np.int64)
            labels[valid] = result.labels
            hierarchy_result = _remap_hierarchy(result, valid)
    if iteration == 1:
        model.first_iteration_hierarchy = ClusterResult(
            labels=labels.copy(), hierarchy=hierarchy_result.hierarchy
        )

    n_clusters = int(labels.max() + 1) if labels.size else 0
    if config.cluster_order == "descending_size":
        sizes = np.bincount(labels[labels >= 0], minlength=n_clusters)
        order = sorted(range(n_clusters), key=lambda lbl: (-sizes[lbl], lbl))
    else:
        order = list(range(n_clusters))

    label_to_component: list[int | None] = [None] * n_clusters
    added = 0
    for lbl in order:
        member_idx = np.flatnonzero(labels == lbl)
        member_rows = residuals.data[member_idx]
        try:
            centroid = compute_centroid(member_rows)
        except DegenerateClusterError as exc:
            logger.info("iteration %d cluster %d skipped: %s", iteration, lbl, exc)
            continue
        comp = SemanticComponent(
            id=len(model.components),
            iteration=iteration,
            vector=centroid.astype(np.float32),
            cluster_size=int(member_idx.size),
        )
        if corpus is not None:
            comp.medoid_doc_id = corpus.ids[
                int(member_idx[medoid(member_rows, centroid)])
            ]
        model.components.append(comp)
        label_to_component[lbl] = comp.id
        added += 1
        decompose(residuals, comp.vector, config.mu, config.alpha)

    if corpus is not None and vocab is not None and n_clusters:
        classes, weights = ctfidf_weights(corpus, labels, vocab)
        for row, cls in enumerate(classes):
            comp_id = label_to_component[cls]
            if comp_id is None:
                continue
            tokens, token_weights = top_tokens(weights[row], vocab, TOP_K)
            model.components[comp_id].token_repr = tokens
            model.components[comp_id].token_weights = token_weights

    model.cluster_assignments.append(labels)
    model.label_to_component.append(label_to_component)
    model.iteration_log.append(
        IterationRecord(
            iteration=iteration,
            clusters_found=n_clusters,
            components_added=added,
            residual_norm=residual_norm(residuals, config),
            wall_time=time.perf_counter() - started,
        )
    )
    return n_clusters


def should_stop(
    model: ScaModel, residuals: EmbeddingMatrix | None = None
) -> tuple[bool, str | None]:
    """Check the stopping rules in fixed order: F, then NC-S, then RN.

    F fires after the configured iteration budget. NC-S fires when the last
    ``stop_window`` completed iterations found fewer than
    ``stop_new_clusters`` clusters in total (needs at least that many
    iterations). RN fires when the residual norm drops below the floor.
    """
    config = model.config
    log = model.iteration_log
    if not log:
        raise ValueError("should_stop needs at least one completed iteration")
    if len(log) >= config.stop_fixed_iters:
        return True, "F"
    if len(log) >= config.stop_window:
        recent = sum(r.clusters_found for r in log[-config.stop_window:])
        if recent < config.stop_new_clusters:
            return True, "NC-S"
    norm = log[-1].residual_norm
    if norm is None and residuals is not None:  # pragma: no cover
        norm = residual_norm(residuals, config)
    if norm is not None and norm < config.stop_residual_norm:
        return True, "RN"
    return False, None


def merge_components(model: ScaModel, theta: float | None = None) -> dict[int, int]:
    """Unify components whose top-token overlap exceeds theta.

    Overlap is the shared-token count divided by the representation size
    (ten). Qualifying pairs are grouped transitively and every later
    component points at the earliest member of its group, which keeps its
    own tokens and vector. Running the merge again changes nothing.
    """
    if theta is None:
        theta = model.config.theta
    comps = model.components
    parent = list(range(len(comps)))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    token_sets = [frozenset(c.token_repr) for c in comps]
    for i in range(len(comps)):
        if not token_sets[i]:
            continue
        for j in range(i + 1, len(comps)):
            if not token_sets[j]:
                continue
            overlap = len(token_sets[i] & token_sets[j]) / TOP_K
            if overlap > theta:
                ri, rj = find(i), find(j)
                if ri != rj:
                    lo, hi = (ri, rj) if ri < rj else (rj, ri)
                    parent[hi] = lo
    merge_map: dict[int, int] = {}
    for idx, comp in enumerate(comps):
        root = find(idx)
        comp.merged_into = root if root != idx else None
        if root != idx:
            merge_map[idx] = root
    return merge_map


def fit(
    embeddings: EmbeddingMatrix,
    config: ScaConfig,
    corpus: DocumentCorpus | None = None,
) -> ScaModel:
    """Run the full iterative decomposition and the final merge pass."""
    config.validate()
    if corpus is not None and len(corpus) != embeddings.n:
        raise ConfigurationError(
            f"corpus has {len(corpus)} documents but embeddings have "
            f"{embeddings.n} rows"
        )
    vocab = None
    if corpus is not None:
        vocab = build_vocabulary(corpus, min_df=config.min_df)
    model = ScaModel(config=config)
    if corpus is not None:
        model.doc_ids = list(corpus.ids)
    residuals = embeddings.copy()
    while True:
        run_iteration(residuals, model, corpus=corpus, vocab=vocab)
        stop, reason = should_stop(model, residuals)
        if stop:
            logger.info(
                "stopping after iteration %d (criterion %s)",
                model.n_iterations,
                reason,
            )
            break
    if corpus is not None:
        merge_components(model)
    model.stop_reason = reason
    return model


def baseline_run(
    embeddings: EmbeddingMatrix,
    config: ScaConfig,
    corpus: DocumentCorpus | None = None,
) -> ScaModel:
    """Standalone single-pass pipeline: reduce, cluster, represent.

    This is the non-iterative reference the first fitting iteration is
    defined to match exactly under a shared seed.
    """
    config.validate()
    vocab = build_vocabulary(corpus, min_df=config.min_df) if corpus else None
    model = ScaModel(config=config)
    if corpus is not None:
        model.doc_ids = list(corpus.ids)
    residuals = embeddings.copy()
    run_iteration(residuals, model, corpus=corpus, vocab=vocab)
    return model


def transform(
    x: np.ndarray, model: ScaModel, return_residual: bool = False
):
    """Sequential gated activations of one vector along all components.

    Walking components in discovery order, each step reads the cosine gate
    on the current residual, records ``mu * <residual, v>`` when the gate
    opens, and subtracts that amount of v from the residual. A zero vector
    yields all-zero activations.
    """
    config = model.config
    residual = np.asarray(x, dtype=np.float64).copy()
    activations = np.zeros(len(model.components))
    for i, comp in enumerate(model.components):
        norm = float(np.linalg.norm(residual))
        if norm == 0.0:
            break
        v = comp.vector.astype(np.float64)
        score = float(residual @ v)
        if score / norm > config.alpha:
            activations[i] = config.mu * score
            residual -= activations[i] * v
    if return_residual:
        return activations, residual
    return activations


def transform_batch(
    rows: np.ndarray, model: ScaModel, return_residual: bool = False
):
    """Vectorized ``transform`` over a matrix of row vectors."""
    config = model.config
    residual = np.asarray(rows, dtype=np.float64).copy()
    n = residual.shape[0]
    activations = np.zeros((n, len(model.components)))
    for i, comp in enumerate(model.components):
        v = comp.vector.astype(np.float64)
        norms = np.linalg.norm(residual, axis=1)
        scores = residual @ v
        cos = np.zeros_like(scores)
        nonzero = norms > 0.0
        cos[nonzero] = scores[nonzero] / norms[nonzero]
        gate = nonzero & (cos > config.alpha)
        acts = np.where(gate, config.mu * scores, 0.0)
        activations[:, i] = acts
        residual[gate] -= np.outer(acts[gate], v)
    if return_residual:
        return activations, residual
    return activations


@dataclass
class AssignedTopic:
    topic_id: int
    score: float | None = None


def assign_topics(
    doc_index: int,
    model: ScaModel,
    mode: str = "cluster",
    top_k: int = 3,
    embeddings: EmbeddingMatrix | None = None,
) -> list[AssignedTopic]:
    """Topics of one document, either from cluster labels or activations.

    Cluster mode lists the merged topic of the document's cluster in each
    iteration (noise iterations skipped, duplicates collapsed). Activation
    mode ranks components by activation magnitude and reports the top_k
    with their signed scores.
    """
    if mode == "cluster":
        n_docs = len(model.cluster_assignments[0]) if model.cluster_assignments else 0
        if not 0 <= doc_index < n_docs:
            raise KeyError(f"unknown document index {doc_index}")
        out: list[AssignedTopic] = []
        seen: set[int] = set()
        for labels, mapping in zip(
            model.cluster_assignments, model.label_to_component
        ):
            label = int(labels[doc_index])
            if label < 0:
                continue
            comp_id = mapping[label]
            if comp_id is None:
                continue
            rep = model.resolve(comp_id)
            if rep not in seen:
                seen.add(rep)
                out.append(AssignedTopic(topic_id=rep))
        return out
    if mode == "activation":
        if embeddings is None:
            raise ConfigurationError("activation mode needs the embedding matrix")
        if not 0 <= doc_index < embeddings.n:
            raise KeyError(f"unknown document index {doc_index}")
        acts = transform(embeddings.data[doc_index], model)
        order = sorted(
            range(len(acts)), key=lambda i: (-abs(acts[i]), i)
        )
        threshold = model.config.activation_threshold
        out = []
        seen = set()
        for i in order:
            if acts[i] == 0.0:
                continue
            if threshold is not None and abs(acts[i]) < threshold:
                continue
            rep = model.resolve(i)
            if rep in seen:
                continue
            seen.add(rep)
            out.append(AssignedTopic(topic_id=rep, score=float(acts[i])))
            if len(out) >= top_k:
                break
        return out
    raise ConfigurationError(f"unknown assignment mode {mode!r}")


def model_to_dict(model: ScaModel) -> dict:
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "config": model.config.to_dict(),
        "components": [
            {
                "id": c.id,
                "iteration": c.iteration,
                "cluster_size": c.cluster_size,
                "vector": [float(v) for v in c.vector],
                "tokens": list(c.token_repr),
                "token_weights": [float(w) for w in c.token_weights],
                "merged_into": c.merged_into,
                "medoid_doc_id": c.medoid_doc_id,
            }
            for c in model.components
        ],
        "iteration_log": [
            {
                "iteration": r.iteration,
                "clusters_found": r.clusters_found,
                "components_added": r.components_added,
                "residual_norm": r.residual_norm,
            }
            for r in model.iteration_log
        ],
        "assignments": [
            [int(x) for x in labels] for labels in model.cluster_assignments
        ],
        "label_to_component": [
            list(mapping) for mapping in model.label_to_component
        ],
        "first_iteration_hierarchy": (
            model.first_iteration_hierarchy.hierarchy_to_json()
            if model.first_iteration_hierarchy is not None
            else None
        ),
        "doc_ids": model.doc_ids,
        "stop_reason": model.stop_reason,
    }


def model_from_dict(obj: dict) -> ScaModel:
    if obj.get("format_version") != MODEL_FORMAT_VERSION:
        raise ConfigurationError(
            f"unsupported model format version {obj.get('format_version')!r}"
        )
    config = ScaConfig.from_dict(obj["config"])
    model = ScaModel(config=config)
    for entry in obj["components"]:
        model.components.append(
            SemanticComponent(
                id=int(entry["id"]),
                iteration=int(entry["iteration"]),
                vector=np.asarray(entry["vector"], dtype=np.float32),
                cluster_size=int(entry["cluster_size"]),
                token_repr=list(entry["tokens"]),
                token_weights=[float(w) for w in entry["token_weights"]],
                merged_into=entry["merged_into"],
                medoid_doc_id=entry["medoid_doc_id"],
            )
        )
    for entry in obj["iteration_log"]:
        model.iteration_log.append(
            IterationRecord(
                iteration=int(entry["iteration"]),
                clusters_found=int(entry["clusters_found"]),
                components_added=int(entry["components_added"]),
                residual_norm=float(entry["residual_norm"]),
            )
        )
    model.cluster_assignments = [
        np.asarray(labels, dtype=np.int64) for labels in obj["assignments"]
    ]
    model.label_to_component = [
        [None if x is None else int(x) for x in mapping]
        for mapping in obj["label_to_component"]
    ]
    if obj.get("first_iteration_hierarchy") is not None:
        hierarchy = ClusterResult.hierarchy_from_json(
            obj["first_iteration_hierarchy"]
        )
        labels = (
            model.cluster_assignments[0]
            if model.cluster_assignments
            else np.zeros(0, dtype=np.int64)
        )
        model.first_iteration_hierarchy = ClusterResult(
            labels=labels, hierarchy=hierarchy
        )
    model.doc_ids = obj.get("doc_ids")
    model.stop_reason = obj.get("stop_reason")
    return model


def save_model(model: ScaModel, path: str | Path) -> None:
    """Write the model as canonical JSON (stable byte-for-byte per fit)."""
    payload = json.dumps(
        model_to_dict(model), sort_keys=True, separators=(",", ":"),
        ensure_ascii=False,
    )
    Path(path).write_text(payload + "\n", encoding="utf-8")


def load_model(path: str | Path) -> ScaModel:
    with Path(path).open("r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
