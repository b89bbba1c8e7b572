"""Run configuration: flat key=value files, named presets, flag overrides.

Resolution order is defaults, then preset, then config file, then command
line flags; the fully resolved configuration is echoed into every report so
results always carry their provenance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .cluster import ClusterConfig
from .engine import ScaConfig
from .errors import ConfigurationError
from .reduce import ReducerConfig

# hyperparameter bundles used in the reference runs
PRESETS: dict[str, dict] = {
    "trump": {
        "alpha": 0.20,
        "mu": 0.95,
        "min_cluster_size": 100,
        "min_samples": 50,
        "theta": 0.5,
    },
    "hausa": {
        "alpha": 0.10,
        "mu": 1.00,
        "min_cluster_size": 300,
        "min_samples": 300,
        "theta": 0.5,
    },
    "chinese": {
        "alpha": 0.10,
        "mu": 1.00,
        "min_cluster_size": 300,
        "min_samples": 300,
        "theta": 0.5,
    },
}

# default grid axes for the hyperparameter sweep
GRID_ALPHAS = [0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5]
GRID_MUS = [0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 1.0]


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigurationError(f"expected a boolean, got {raw!r}")


def _parse_float_list(raw: str) -> list[float]:
    return [float(tok) for tok in raw.split(",") if tok.strip()]


def _parse_optional_float(raw: str):
    raw = raw.strip()
    return float(raw) if raw else None


def _parse_optional_int(raw: str):
    raw = raw.strip()
    return int(raw) if raw else None


def _parse_optional_str(raw: str):
    raw = raw.strip()
    return raw or None


def _parse_str_list(raw: str) -> list[str]:
    return [tok.strip() for tok in raw.split(",") if tok.strip()]


_SCHEMA = {
    "alpha": float,
    "mu": float,
    "theta": float,
    "seed": int,
    "stop_fixed_iters": int,
    "stop_window": int,
    "stop_new_clusters": int,
    "stop_residual_norm": float,
    "residual_norm_mode": str,
    "cluster_order": str,
    "activation_threshold": _parse_optional_float,
    "min_df": int,
    "lowercase": _parse_bool,
    "stopwords": _parse_str_list,
    "reducer_kind": str,
    "reducer_target_dim": int,
    "reducer_metric": str,
    "reducer_n_neighbors": int,
    "reducer_layout_epochs": int,
    "min_cluster_size": int,
    "min_samples": int,
    "grid_alphas": _parse_float_list,
    "grid_mus": _parse_float_list,
    "grid_workers": int,
    "cv_gamma": float,
    "top_k_restrict": _parse_optional_int,
    "embed_endpoint": _parse_optional_str,
    "embed_token": _parse_optional_str,
    "embed_batch_size": int,
    "embeddings_format": str,
}


@dataclass
class RunConfig:
    alpha: float = 0.0
    mu: float = 1.0
    theta: float = 0.5
    seed: int = 0
    stop_fixed_iters: int = 10
    stop_window: int = 2
    stop_new_clusters: int = 5
    stop_residual_norm: float = 0.01
    residual_norm_mode: str = "spectral"
    cluster_order: str = "ascending_label"
    activation_threshold: float | None = None
    min_df: int = 2
    lowercase: bool = True
    stopwords: list[str] = field(default_factory=list)
    reducer_kind: str = "pca"
    reducer_target_dim: int = 5
    reducer_metric: str = "cosine"
    reducer_n_neighbors: int = 15
    reducer_layout_epochs: int = 200
    min_cluster_size: int = 10
    min_samples: int = 10
    grid_alphas: list[float] = field(default_factory=lambda: list(GRID_ALPHAS))
    grid_mus: list[float] = field(default_factory=lambda: list(GRID_MUS))
    grid_workers: int = 1
    cv_gamma: float = 2.0
    top_k_restrict: int | None = None
    embed_endpoint: str | None = None
    embed_token: str | None = None
    embed_batch_size: int = 64
    embeddings_format: str = "binary"

    def apply(self, updates: dict) -> None:
        for key, value in updates.items():
            if key not in _SCHEMA:
                raise ConfigurationError(f"unknown configuration key {key!r}")
            if value is not None:
                setattr(self, key, value)

    def to_sca_config(self) -> ScaConfig:
        return ScaConfig(
            alpha=self.alpha,
            mu=self.mu,
            theta=self.theta,
            stop_fixed_iters=self.stop_fixed_iters,
            stop_window=self.stop_window,
            stop_new_clusters=self.stop_new_clusters,
            stop_residual_norm=self.stop_residual_norm,
            residual_norm_mode=self.residual_norm_mode,
            cluster_order=self.cluster_order,
            activation_threshold=self.activation_threshold,
            min_df=self.min_df,
            lowercase=self.lowercase,
            seed=self.seed,
            reducer=ReducerConfig(
                kind=self.reducer_kind,
                target_dim=self.reducer_target_dim,
                metric=self.reducer_metric,
                n_neighbors=self.reducer_n_neighbors,
                layout_epochs=self.reducer_layout_epochs,
                seed=self.seed,
            ),
            cluster=ClusterConfig(
                min_cluster_size=self.min_cluster_size,
                min_samples=self.min_samples,
            ),
        )

    def resolved_lines(self) -> list[str]:
        """Sorted ``key = value`` lines for report headers."""
        out = []
        for key in sorted(_SCHEMA):
            value = getattr(self, key)
            if isinstance(value, list):
                value = ",".join(str(v) for v in value)
            out.append(f"{key} = {value}")
        return out


def parse_config_file(path: str | Path) -> dict:
    """Read a flat key=value file (# starts a comment, blank lines skipped)."""
    updates: dict = {}
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _SCHEMA:
            raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
        caster = _SCHEMA[key]
        try:
            updates[key] = caster(raw)
        except ConfigurationError:
            raise
        except ValueError as exc:
            raise ConfigurationError(f"{path}:{lineno}: {exc}") from exc
    return updates


def build_run_config(
    config_path: str | Path | None = None,
    preset: str | None = None,
    overrides: dict | None = None,
) -> RunConfig:
    config = RunConfig()
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigurationError(
                f"unknown preset {preset!r}; available: {', '.join(sorted(PRESETS))}"
            )
        config.apply(PRESETS[preset])
    if config_path is not None:
        config.apply(parse_config_file(config_path))
    if overrides:
        config.apply({k: v for k, v in overrides.items() if v is not None})
    return config
