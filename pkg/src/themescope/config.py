"""Pipeline configuration: one TOML or JSON file, fully defaulted.

Defaults reproduce the reference pipeline: dedup at cosine 0.80, PCA to
100 components, UMAP to 20 dimensions, HDBSCAN(20, 5), 5 representatives,
tau grid 0.60..0.90, batches of 10 texts per assignment call.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULT_TAU_GRID = (0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EventSpec:
    name: str
    date: str           # ISO calendar date
    window_days: int = 3


@dataclass(frozen=True)
class StanceConfig:
    test_fraction: float = 0.2
    val_fraction_of_train: float = 0.2
    seed: int = 42
    ngram_grid: tuple[tuple[int, int], ...] = ((1, 1), (1, 2), (2, 3))
    c_grid: tuple[float, ...] = (0.1, 1.0, 10.0)
    max_epochs: int = 500
    tolerance: float = 1e-8


@dataclass(frozen=True)
class LdaConfig:
    n_topics: int = 50
    alpha: Optional[float] = None   # defaults to 50 / n_topics
    beta: float = 0.01
    iterations: int = 1000
    seed: int = 42
    top_n_keywords: int = 5

    def resolved_alpha(self) -> float:
        return self.alpha if self.alpha is not None else 50.0 / self.n_topics


@dataclass(frozen=True)
class PipelineConfig:
    corpus_path: str = ""
    corpus_format: str = "JSONL"
    keyword_list_path: str = ""
    dedup_threshold: float = 0.80
    embed_provider: str = "hash"         # hash | remote
    embed_dim: int = 384
    summary_embed_dim: int = 768
    chat_provider: str = "mock"          # mock | remote
    chat_model: str = ""
    pca_components: int = 100
    umap_neighbors: int = 15
    umap_min_dist: float = 0.1
    umap_epochs: int = 200
    umap_dim: int = 20
    hdbscan_min_cluster_size: int = 20
    hdbscan_min_samples: int = 5
    representatives_k: int = 5
    tau_grid: tuple[float, ...] = DEFAULT_TAU_GRID
    assignment_strategy: str = "SUMMARY_MEDIATED"
    assignment_batch_size: int = 10
    max_in_flight: int = 4
    seed: int = 42
    cache_dir: str = ""
    retrieval_ks: tuple[int, ...] = (1, 5)
    ctfidf_top_n: int = 10
    events: tuple[EventSpec, ...] = ()
    stance: StanceConfig = field(default_factory=StanceConfig)
    lda: LdaConfig = field(default_factory=LdaConfig)

    def __post_init__(self):
        if not 0.0 < self.dedup_threshold <= 1.0:
            raise ConfigError("dedup_threshold must be in (0, 1]")
        if list(self.tau_grid) != sorted(self.tau_grid):
            raise ConfigError("tau_grid must be sorted ascending")
        if any(not 0.0 < t < 1.0 for t in self.tau_grid):
            raise ConfigError("tau values must be in (0, 1)")
        if self.assignment_strategy not in ("SUMMARY_MEDIATED", "DIRECT_THEME"):
            raise ConfigError(
                f"unknown assignment strategy {self.assignment_strategy!r}")
        if self.assignment_batch_size < 1 or self.assignment_batch_size > 10:
            raise ConfigError("assignment_batch_size must be 1..10")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def fingerprint_payload(self) -> dict:
        from .llmgateway import template_versions

        return {"config": self.to_dict(), "templates": template_versions()}

    def fingerprint(self) -> str:
        blob = json.dumps(self.fingerprint_payload(), sort_keys=True,
                          default=str)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _coerce(raw: dict) -> PipelineConfig:
    data = dict(raw)
    if "events" in data:
        data["events"] = tuple(EventSpec(**e) for e in data["events"])
    if "stance" in data:
        st = dict(data["stance"])
        if "ngram_grid" in st:
            st["ngram_grid"] = tuple(tuple(g) for g in st["ngram_grid"])
        if "c_grid" in st:
            st["c_grid"] = tuple(st["c_grid"])
        data["stance"] = StanceConfig(**st)
    if "lda" in data:
        data["lda"] = LdaConfig(**data["lda"])
    for name in ("tau_grid", "retrieval_ks"):
        if name in data:
            data[name] = tuple(data[name])
    known = {f.name for f in dataclasses.fields(PipelineConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return PipelineConfig(**data)


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    if path.suffix.lower() == ".json":
        raw = json.loads(path.read_text("utf-8"))
    else:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    cfg = _coerce(raw)
    for name in ("corpus_path", "keyword_list_path"):
        value = getattr(cfg, name)
        if value and not Path(value).exists():
            raise ConfigError(f"{name} does not exist: {value}")
    return cfg
