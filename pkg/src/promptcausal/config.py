"""Pipeline configuration: one JSON-editable object, CLI-overridable.

The semantic fields (everything except filesystem paths) define the config
hash used in the run manifest, so the same analysis rerun from a different
directory still produces the same hash.  Per-stage randomness is derived
from the single top-level seed by hashing the stage name, which keeps
stages independent of each other's random draws.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping, Optional, Tuple

from promptcausal.codemetrics.aggregate import MetricsConfig
from promptcausal.discovery import DiscoveryConfig
from promptcausal.inference import AteConfig
from promptcausal.optimizer import GaConfig

__all__ = ["LlmConfig", "PipelineConfig", "stage_seed", "load_config"]


@dataclass(frozen=True)
class LlmConfig:
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-3.5-turbo"
    api_key_env: str = "PROMPTCAUSAL_API_KEY"
    retries: int = 2
    max_inflight: int = 4


@dataclass(frozen=True)
class PipelineConfig:
    dataset_path: str = ""
    output_dir: str = "out"
    seed: int = 0
    mock_llm: bool = True
    #: None = full default feature registry; else an explicit name list.
    feature_names: Optional[Tuple[str, ...]] = None
    #: None = default 12-intention registry; else an explicit id list.
    intention_ids: Optional[Tuple[str, ...]] = None
    n_solutions: int = 3
    max_tokens: int = 2000
    #: Rephrasing plan per original problem: the zero vector, every single
    #: intention, plus this many random two-bit combinations.
    random_pairs: int = 2
    drop_alpha: float = 0.05
    objective: str = "pass_rate"
    negligible: float = 0.01
    verify_min_n: int = 50
    ate_min_n: int = 50
    llm: LlmConfig = field(default_factory=LlmConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    discovery: DiscoveryConfig = field(default_factory=DiscoveryConfig)
    ga: GaConfig = field(default_factory=GaConfig)

    def semantic_dict(self) -> dict:
        """Everything that affects results; excludes filesystem paths."""
        out = asdict(self)
        out.pop("dataset_path")
        out.pop("output_dir")
        return out

    def config_hash(self) -> str:
        canon = json.dumps(self.semantic_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def stage_seed(seed: int, stage: str) -> int:
    """Stable per-stage seed derived from the run seed and stage name."""
    digest = hashlib.sha256(f"{seed}:{stage}".encode("utf-8")).hexdigest()
    return int(digest[:8], 16)


_NESTED = {
    "llm": LlmConfig,
    "metrics": MetricsConfig,
    "discovery": DiscoveryConfig,
    "ga": GaConfig,
}


def _build(cls, obj: Mapping) -> object:
    known = {f.name for f in fields(cls)}
    unknown = set(obj) - known
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = {}
    for key, value in obj.items():
        if key in _NESTED and isinstance(value, Mapping):
            kwargs[key] = _build(_NESTED[key], value)
        elif isinstance(value, list):
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    return cls(**kwargs)


def load_config(path: Optional[str | Path] = None, overrides: Optional[Mapping] = None) -> PipelineConfig:
    """Read a JSON config file (optional) and apply flat overrides.

    Override keys may target nested configs with dotted names, e.g.
    ``discovery.edge_threshold``.
    """
    obj: dict = {}
    if path is not None:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(obj, dict):
            raise ValueError("config file must contain a JSON object")
    cfg = _build(PipelineConfig, obj)
    assert isinstance(cfg, PipelineConfig)
    if overrides:
        for key, value in overrides.items():
            if value is None:
                continue
            if "." in key:
                group, leaf = key.split(".", 1)
                sub = getattr(cfg, group)
                cfg = replace(cfg, **{group: replace(sub, **{leaf: value})})
            else:
                cfg = replace(cfg, **{key: value})
    return cfg
