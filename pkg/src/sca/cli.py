"""Command-line front end: fit, grid, assign, topics, metrics, synth, fetch-embed.

Exit codes: 0 on success, 1 on internal or service errors, 2 on input or
configuration errors. Every report embeds the fully resolved configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .client import EmbeddingServiceError, fetch_embeddings
from .config import RunConfig, build_run_config
from .embeddings import (
    EmbeddingLoadError,
    EmbeddingMatrix,
    load_embeddings,
    save_embeddings,
)
from .engine import (
    ScaModel,
    assign_topics,
    fit,
    load_model,
    save_model,
)
from .errors import ConfigurationError
from .evaluation import (
    RunMetrics,
    compute_run_metrics,
    render_grid_matrix,
    render_run_stats_markdown,
    render_summary_markdown,
)
from .representation import render_topic_table_markdown
from .synthetic import SynthSpec, generate
from .text import (
    CorpusError,
    DocumentCorpus,
    load_corpus_jsonl,
    save_corpus_jsonl,
)

logger = logging.getLogger(__name__)

_INPUT_ERRORS = (ConfigurationError, CorpusError, EmbeddingLoadError, FileNotFoundError)

_GRID_METRIC_FIELDS = [
    ("No. of components", "n_components", 0),
    ("Topic diversity", "topic_diversity", 3),
    ("Noise rate", "noise_rate", 3),
    ("NPMI Coherence", "npmi", 3),
    ("CV Coherence", "cv", 3),
]


def _config_header(config: RunConfig) -> str:
    lines = ["## Configuration", "", "```"]
    lines.extend(config.resolved_lines())
    lines += ["```", ""]
    return "\n".join(lines)


def _load_inputs(args, config: RunConfig) -> tuple[DocumentCorpus, EmbeddingMatrix]:
    corpus = load_corpus_jsonl(
        args.documents,
        lowercase=config.lowercase,
        stopwords=set(config.stopwords) or None,
    )
    matrix = load_embeddings(args.embeddings, config.embeddings_format)
    if len(corpus) != matrix.n:
        raise ConfigurationError(
            f"documents ({len(corpus)}) and embeddings ({matrix.n}) are misaligned"
        )
    return corpus, matrix


def _topic_rows(model: ScaModel, corpus: DocumentCorpus | None) -> list[dict]:
    text_by_id = (
        {doc_id: corpus.raw_texts[i] for i, doc_id in enumerate(corpus.ids)}
        if corpus is not None
        else {}
    )
    rows = []
    for comp in sorted(model.representatives(), key=lambda c: (-c.cluster_size, c.id)):
        rows.append(
            {
                "id": comp.id,
                "iteration": comp.iteration,
                "size": comp.cluster_size,
                "tokens": list(comp.token_repr),
                "medoid_doc_id": comp.medoid_doc_id,
                "medoid_text": text_by_id.get(comp.medoid_doc_id),
            }
        )
    return rows


def _write_fit_reports(
    out_dir: Path,
    model: ScaModel,
    metrics: RunMetrics,
    config: RunConfig,
    corpus: DocumentCorpus,
) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    save_model(model, out_dir / "model.json")
    (out_dir / "metrics.json").write_text(metrics.to_json() + "\n", encoding="utf-8")
    header = _config_header(config)
    (out_dir / "run_stats.md").write_text(
        "# Run statistics\n\n" + header + "\n"
        + render_run_stats_markdown(metrics, model.config)
        + "\n" + render_summary_markdown(metrics),
        encoding="utf-8",
    )
    rows = _topic_rows(model, corpus)
    (out_dir / "topics.md").write_text(
        "# Topics\n\n" + header + "\n" + render_topic_table_markdown(rows),
        encoding="utf-8",
    )
    (out_dir / "topics.json").write_text(
        json.dumps(rows, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    if model.first_iteration_hierarchy is not None:
        model.first_iteration_hierarchy.save_hierarchy(out_dir / "hierarchy.json")


def cmd_fit(args) -> int:
    config = build_run_config(args.config, args.preset, _flag_overrides(args))
    corpus, matrix = _load_inputs(args, config)
    model = fit(matrix, config.to_sca_config(), corpus)
    metrics = compute_run_metrics(
        model,
        corpus,
        true_labels=corpus.labels,
        top_k_restrict=config.top_k_restrict,
        cv_gamma=config.cv_gamma,
    )
    _write_fit_reports(Path(args.out_dir), model, metrics, config, corpus)
    print(
        f"fit: {metrics.n_components} topics "
        f"({metrics.n_components_first_iter} in first iteration), "
        f"noise rate {metrics.noise_rate:.3f}, "
        f"stopped by {model.stop_reason}"
    )
    return 0


def _grid_cell(documents, embeddings, config: RunConfig, alpha: float, mu: float):
    """One grid fit; merging disabled by forcing the threshold to 1."""
    cell_config = replace(config, alpha=alpha, mu=mu, theta=1.0)
    corpus = load_corpus_jsonl(
        documents,
        lowercase=cell_config.lowercase,
        stopwords=set(cell_config.stopwords) or None,
    )
    matrix = load_embeddings(embeddings, cell_config.embeddings_format)
    model = fit(matrix, cell_config.to_sca_config(), corpus)
    metrics = compute_run_metrics(model, corpus, cv_gamma=cell_config.cv_gamma)
    return json.loads(metrics.to_json())


def cmd_grid(args) -> int:
    config = build_run_config(args.config, args.preset, _flag_overrides(args))
    if args.alphas:
        config.grid_alphas = [float(t) for t in args.alphas.split(",") if t.strip()]
    if args.mus:
        config.grid_mus = [float(t) for t in args.mus.split(",") if t.strip()]
    if not config.grid_alphas or not config.grid_mus:
        raise ConfigurationError("grid axes must be nonempty")
    # fail fast on unreadable inputs before spawning workers
    _load_inputs(args, config)

    cells: dict[tuple[float, float], dict] = {}
    jobs = [(alpha, mu) for mu in config.grid_mus for alpha in config.grid_alphas]
    if config.grid_workers > 1:
        with ProcessPoolExecutor(max_workers=config.grid_workers) as pool:
            futures = {
                (alpha, mu): pool.submit(
                    _grid_cell, args.documents, args.embeddings, config, alpha, mu
                )
                for alpha, mu in jobs
            }
            for key, future in futures.items():
                try:
                    cells[key] = {"metrics": future.result()}
                except Exception as exc:  # cell failures stay in-cell
                    cells[key] = {"error": str(exc)}
    else:
        for alpha, mu in jobs:
            try:
                cells[(alpha, mu)] = {
                    "metrics": _grid_cell(
                        args.documents, args.embeddings, config, alpha, mu
                    )
                }
            except Exception as exc:
                cells[(alpha, mu)] = {"error": str(exc)}

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sections = [
        "# Grid run (merge threshold forced to 1.0)",
        "",
        _config_header(config),
    ]
    for title, fieldname, digits in _GRID_METRIC_FIELDS:
        rendered: dict[tuple[float, float], str] = {}
        for key, cell in cells.items():
            if "error" in cell:
                rendered[key] = "error"
            else:
                value = cell["metrics"].get(fieldname)
                rendered[key] = (
                    "n/a" if value is None else f"{value:.{digits}f}"
                    if digits else str(value)
                )
        sections.append(
            render_grid_matrix(title, config.grid_alphas, config.grid_mus, rendered)
        )
    (out_dir / "grid.md").write_text("\n".join(sections), encoding="utf-8")
    payload = {
        "alphas": config.grid_alphas,
        "mus": config.grid_mus,
        "cells": [
            {"alpha": alpha, "mu": mu, **cells[(alpha, mu)]}
            for alpha, mu in jobs
        ],
    }
    (out_dir / "grid.json").write_text(
        json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8"
    )
    failures = sum(1 for cell in cells.values() if "error" in cell)
    print(f"grid: {len(jobs)} cells, {failures} failed")
    return 0


def _is_blank_file(path: str | None) -> bool:
    if not path:
        return False
    p = Path(path)
    return p.exists() and not any(
        line.strip() for line in p.read_text(encoding="utf-8").splitlines()
    )


def cmd_assign(args) -> int:
    model = load_model(args.model)
    out_path = Path(args.out) if args.out else None
    if _is_blank_file(args.documents):
        if out_path:
            out_path.write_text("", encoding="utf-8")
        return 0
    lines: list[str] = []
    if args.mode == "activation":
        if not args.embeddings:
            raise ConfigurationError("activation mode needs --embeddings")
        matrix = load_embeddings(args.embeddings, args.embeddings_format)
        dim = model.components[0].vector.shape[0] if model.components else matrix.dim
        if matrix.dim != dim:
            raise ConfigurationError(
                f"model dimension {dim} does not match embeddings {matrix.dim}"
            )
        ids = _assign_ids(args, model, matrix.n)
        for i in range(matrix.n):
            topics = assign_topics(
                i, model, mode="activation", top_k=args.top_k, embeddings=matrix
            )
            lines.append(_assign_line(ids[i], topics, model))
    else:
        n = len(model.cluster_assignments[0]) if model.cluster_assignments else 0
        ids = _assign_ids(args, model, n)
        for i in range(n):
            topics = assign_topics(i, model, mode="cluster", top_k=args.top_k)
            lines.append(_assign_line(ids[i], topics, model))
    payload = "".join(lines)
    if out_path:
        out_path.write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)
    return 0


def _assign_ids(args, model: ScaModel, n: int) -> list[str]:
    if args.documents:
        corpus = load_corpus_jsonl(args.documents)
        if len(corpus) != n:
            raise ConfigurationError(
                f"documents ({len(corpus)}) do not match input rows ({n})"
            )
        return list(corpus.ids)
    if model.doc_ids and len(model.doc_ids) == n:
        return list(model.doc_ids)
    return [f"doc{i:06d}" for i in range(n)]


def _assign_line(doc_id: str, topics, model: ScaModel) -> str:
    obj = {
        "id": doc_id,
        "topics": [t.topic_id for t in topics],
        "scores": [t.score for t in topics],
        "tokens": [list(model.components[t.topic_id].token_repr) for t in topics],
    }
    return json.dumps(obj, sort_keys=True, ensure_ascii=False) + "\n"


def cmd_topics(args) -> int:
    model = load_model(args.model)
    corpus = load_corpus_jsonl(args.documents) if args.documents else None
    rows = _topic_rows(model, corpus)
    table = render_topic_table_markdown(rows)
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
    else:
        sys.stdout.write(table)
    return 0


def cmd_metrics(args) -> int:
    model = load_model(args.model)
    corpus = load_corpus_jsonl(args.documents) if args.documents else None
    metrics = compute_run_metrics(
        model,
        corpus,
        true_labels=corpus.labels if corpus is not None else None,
        top_k_restrict=args.top_k_restrict,
        cv_gamma=args.cv_gamma,
    )
    payload = metrics.to_json() + "\n"
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)
    if args.md_out:
        Path(args.md_out).write_text(
            "# Run statistics\n\n" + render_run_stats_markdown(metrics, model.config),
            encoding="utf-8",
        )
    return 0


def cmd_synth(args) -> int:
    weights = None
    if args.topic_count_weights:
        weights = tuple(
            float(t) for t in args.topic_count_weights.split(",") if t.strip()
        )
    spec = SynthSpec(
        n_docs=args.n_docs,
        dim=args.dim,
        n_topics=args.topics,
        topics_per_doc=(args.min_topics, args.max_topics),
        coefficient_range=(args.coeff_lo, args.coeff_hi),
        noise_sigma=args.noise_sigma,
        tokens_per_topic=args.tokens_per_topic,
        tokens_per_doc=args.tokens_per_doc,
        seed=args.seed,
        topic_count_weights=weights,
        direction_correlation=args.correlation,
    )
    data = generate(spec)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    save_corpus_jsonl(data.corpus, Path(str(prefix) + ".jsonl"))
    save_embeddings(data.embeddings, Path(str(prefix) + ".scae"))
    truth = {
        "directions": [[float(v) for v in row] for row in data.directions],
        "topic_sets": [list(t) for t in data.topic_sets],
    }
    Path(str(prefix) + ".truth.json").write_text(
        json.dumps(truth, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(
        f"synth: wrote {data.embeddings.n} documents "
        f"({spec.n_topics} planted topics) to {prefix}.jsonl/.scae/.truth.json"
    )
    return 0


def cmd_fetch_embed(args) -> int:
    corpus = load_corpus_jsonl(args.documents)
    matrix = fetch_embeddings(
        args.endpoint,
        corpus.clean_texts,
        batch_size=args.batch_size,
        max_attempts=args.max_attempts,
        bearer_token=args.token,
    )
    save_embeddings(matrix, args.out)
    print(f"fetch-embed: wrote {matrix.n}x{matrix.dim} matrix to {args.out}")
    return 0


def _flag_overrides(args) -> dict:
    keys = (
        "alpha", "mu", "theta", "seed", "stop_fixed_iters", "min_cluster_size",
        "min_samples", "reducer_kind", "reducer_target_dim", "reducer_metric",
        "reducer_n_neighbors", "reducer_layout_epochs", "cluster_order",
        "grid_workers", "top_k_restrict", "cv_gamma", "embeddings_format",
    )
    return {key: getattr(args, key, None) for key in keys}


def _add_fit_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--documents", required=True, help="JSONL corpus path")
    parser.add_argument("--embeddings", required=True, help="SCAE or CSV matrix path")
    parser.add_argument("--embeddings-format", dest="embeddings_format",
                        choices=["binary", "csv"], default=None)
    parser.add_argument("--config", default=None, help="flat key=value config file")
    parser.add_argument("--preset", default=None,
                        help="named hyperparameter preset (trump, hausa, chinese)")
    parser.add_argument("--alpha", type=float, default=None)
    parser.add_argument("--mu", type=float, default=None)
    parser.add_argument("--theta", type=float, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--iterations", dest="stop_fixed_iters", type=int,
                        default=None, help="fixed iteration budget")
    parser.add_argument("--min-cluster-size", dest="min_cluster_size", type=int,
                        default=None)
    parser.add_argument("--min-samples", dest="min_samples", type=int, default=None)
    parser.add_argument("--reducer", dest="reducer_kind", default=None,
                        choices=["identity", "pca", "graph_layout"])
    parser.add_argument("--target-dim", dest="reducer_target_dim", type=int,
                        default=None)
    parser.add_argument("--reducer-metric", dest="reducer_metric", default=None,
                        choices=["cosine", "euclidean"])
    parser.add_argument("--n-neighbors", dest="reducer_n_neighbors", type=int,
                        default=None)
    parser.add_argument("--layout-epochs", dest="reducer_layout_epochs", type=int,
                        default=None)
    parser.add_argument("--cluster-order", dest="cluster_order", default=None,
                        choices=["ascending_label", "descending_size"])
    parser.add_argument("--top-k-restrict", dest="top_k_restrict", type=int,
                        default=None)
    parser.add_argument("--cv-gamma", dest="cv_gamma", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sca",
        description="Residual-clustering topic modeling with semantic components",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a model and write reports")
    _add_fit_flags(p_fit)
    p_fit.add_argument("--out-dir", required=True)
    p_fit.set_defaults(func=cmd_fit)

    p_grid = sub.add_parser("grid", help="hyperparameter grid of fits")
    _add_fit_flags(p_grid)
    p_grid.add_argument("--out-dir", required=True)
    p_grid.add_argument("--alphas", default=None, help="comma-separated alpha axis")
    p_grid.add_argument("--mus", default=None, help="comma-separated mu axis")
    p_grid.add_argument("--grid-workers", dest="grid_workers", type=int, default=None)
    p_grid.set_defaults(func=cmd_grid)

    p_assign = sub.add_parser("assign", help="per-document topics from a model")
    p_assign.add_argument("--model", required=True)
    p_assign.add_argument("--documents", default=None)
    p_assign.add_argument("--embeddings", default=None)
    p_assign.add_argument("--embeddings-format", dest="embeddings_format",
                          choices=["binary", "csv"], default="binary")
    p_assign.add_argument("--mode", choices=["cluster", "activation"],
                          default="cluster")
    p_assign.add_argument("--top-k", dest="top_k", type=int, default=3)
    p_assign.add_argument("--out", default=None)
    p_assign.set_defaults(func=cmd_assign)

    p_topics = sub.add_parser("topics", help="print the topic table of a model")
    p_topics.add_argument("--model", required=True)
    p_topics.add_argument("--documents", default=None,
                          help="corpus for medoid texts")
    p_topics.add_argument("--out", default=None)
    p_topics.set_defaults(func=cmd_topics)

    p_metrics = sub.add_parser("metrics", help="recompute statistics from a model")
    p_metrics.add_argument("--model", required=True)
    p_metrics.add_argument("--documents", default=None)
    p_metrics.add_argument("--top-k-restrict", dest="top_k_restrict", type=int,
                           default=None)
    p_metrics.add_argument("--cv-gamma", dest="cv_gamma", type=float, default=2.0)
    p_metrics.add_argument("--out", default=None)
    p_metrics.add_argument("--md-out", dest="md_out", default=None)
    p_metrics.set_defaults(func=cmd_metrics)

    p_synth = sub.add_parser("synth", help="generate a synthetic fixture dataset")
    p_synth.add_argument("--n-docs", dest="n_docs", type=int, required=True)
    p_synth.add_argument("--dim", type=int, required=True)
    p_synth.add_argument("--topics", type=int, required=True)
    p_synth.add_argument("--min-topics", dest="min_topics", type=int, default=1)
    p_synth.add_argument("--max-topics", dest="max_topics", type=int, default=1)
    p_synth.add_argument("--coeff-lo", dest="coeff_lo", type=float, default=0.5)
    p_synth.add_argument("--coeff-hi", dest="coeff_hi", type=float, default=1.5)
    p_synth.add_argument("--noise-sigma", dest="noise_sigma", type=float, default=0.0)
    p_synth.add_argument("--tokens-per-topic", dest="tokens_per_topic", type=int,
                         default=20)
    p_synth.add_argument("--tokens-per-doc", dest="tokens_per_doc", type=int,
                         default=8)
    p_synth.add_argument("--topic-count-weights", dest="topic_count_weights",
                         default=None)
    p_synth.add_argument("--correlation", type=float, default=0.0)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out-prefix", dest="out_prefix", required=True)
    p_synth.set_defaults(func=cmd_synth)

    p_fetch = sub.add_parser("fetch-embed", help="embed texts via a service")
    p_fetch.add_argument("--endpoint", required=True)
    p_fetch.add_argument("--documents", required=True)
    p_fetch.add_argument("--out", required=True)
    p_fetch.add_argument("--batch-size", dest="batch_size", type=int, default=64)
    p_fetch.add_argument("--max-attempts", dest="max_attempts", type=int, default=3)
    p_fetch.add_argument("--token", default=None)
    p_fetch.set_defaults(func=cmd_fetch_embed)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EmbeddingServiceError as exc:
        print(f"embedding service error: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:  # downstream pager closed early
        try:
            sys.stdout.close()
        except Exception:
            pass
        return 0
    except Exception as exc:  # pragma: no cover
        logger.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
