"""Run configuration: model roster, endpoints, cassette mode, budgets."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .core import TabqaError
from .gateway import Gateway, LiveGateway, RecordingGateway, ReplayGateway
from .retrieval import HttpEmbedder, TrigramEmbedder

CANDIDATE_ROLES = ("sql_a", "sql_b", "script_a", "script_b", "e2e")

# Default roster mirrors the reference setup: two coder models for SQL and
# scripts, a long-context model for direct answering, a large instruct
# model for orchestration, and a small model for retrieval.
DEFAULT_MODELS = {
    "sql_a": "codestral-2501",
    "sql_b": "qwen2.5-coder-32b-instruct",
    "script_a": "codestral-2501",
    "script_b": "qwen2.5-coder-32b-instruct",
    "e2e": "minimax-01",
    "orchestrator": "llama-3.3-70b-instruct",
    "column_selector": "llama-3.3-70b-instruct",
    "embedder": "builtin-trigram",
}

API_KEY_ENV = "TABQA_API_KEY"


class ConfigError(TabqaError):
    pass


@dataclass
class RunConfig:
    models: dict = field(default_factory=lambda: dict(DEFAULT_MODELS))
    endpoint: str = "http://127.0.0.1:8000"
    api_key: str | None = None
    embedding_endpoint: str | None = None
    mode: str = "replay"  # live | record | replay
    cassette_path: str | None = None
    k_rows: int = 3
    sql_timeout_s: float = 10.0
    script_timeout_ms: int = 30_000
    e2e_row_limit: int = 20
    dialogue_variant: bool = False
    explain_columns: bool = False
    sandbox_cmd: tuple[str, ...] | None = None
    output_dir: str = "out"
    concurrency: int = 5

    def validate(self) -> None:
        if self.mode not in ("live", "record", "replay"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.mode in ("record", "replay") and not self.cassette_path:
            raise ConfigError(f"{self.mode} mode requires a cassette path")
        missing = [role for role in CANDIDATE_ROLES if not self.models.get(role)]
        if missing:
            raise ConfigError(f"unconfigured candidate roles: {', '.join(missing)}")
        for role in ("orchestrator", "column_selector", "embedder"):
            if not self.models.get(role):
                raise ConfigError(f"unconfigured role: {role}")
        if self.k_rows < 1:
            raise ConfigError("k_rows must be >= 1")
        if self.concurrency < 1:
            raise ConfigError("concurrency must be >= 1")

    @classmethod
    def from_obj(cls, obj: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg = cls()
        for key, value in obj.items():
            if key == "models":
                if not isinstance(value, dict):
                    raise ConfigError("models must be a mapping of role -> model name")
                cfg.models.update(value)
            elif key == "sandbox_cmd":
                cfg.sandbox_cmd = tuple(value) if value else None
            else:
                setattr(cfg, key, value)
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                obj = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(obj, dict):
            raise ConfigError(f"config root must be an object: {path}")
        return cls.from_obj(obj)

    def resolved_api_key(self) -> str | None:
        return self.api_key or os.environ.get(API_KEY_ENV)


def build_gateway(cfg: RunConfig) -> Gateway:
    if cfg.mode == "replay":
        return ReplayGateway(cfg.cassette_path)
    live = LiveGateway(endpoint=cfg.endpoint, api_key=cfg.resolved_api_key())
    if cfg.mode == "record":
        return RecordingGateway(live, cfg.cassette_path)
    return live


def build_embedder(cfg: RunConfig):
    name = cfg.models["embedder"]
    if name == "builtin-trigram":
        return TrigramEmbedder()
    endpoint = cfg.embedding_endpoint or cfg.endpoint
    return HttpEmbedder(endpoint=endpoint, model=name, api_key=cfg.resolved_api_key())
