"""Semantic component analysis: multi-topic modeling via residual clustering."""

from ._kernels import BACKEND
from .cluster import ClusterConfig, ClusterResult, build_hierarchy
from .embeddings import (
    EmbeddingMatrix,
    cosine_similarity,
    load_embeddings,
    save_embeddings,
    spectral_norm,
)
from .engine import (
    ScaConfig,
    ScaModel,
    SemanticComponent,
    assign_topics,
    baseline_run,
    fit,
    load_model,
    merge_components,
    save_model,
    transform,
    transform_batch,
)
from .evaluation import RunMetrics, compute_run_metrics
from .reduce import ReducerConfig
from .synthetic import SynthSpec, generate, score_recovery
from .text import DocumentCorpus, Vocabulary, build_vocabulary, preprocess_text, tokenize

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ClusterConfig",
    "ClusterResult",
    "DocumentCorpus",
    "EmbeddingMatrix",
    "ReducerConfig",
    "RunMetrics",
    "ScaConfig",
    "ScaModel",
    "SemanticComponent",
    "SynthSpec",
    "Vocabulary",
    "assign_topics",
    "baseline_run",
    "build_hierarchy",
    "build_vocabulary",
    "compute_run_metrics",
    "cosine_similarity",
    "fit",
    "generate",
    "load_embeddings",
    "load_model",
    "merge_components",
    "preprocess_text",
    "save_embeddings",
    "save_model",
    "score_recovery",
    "spectral_norm",
    "tokenize",
    "transform",
    "transform_batch",
    "__version__",
]
