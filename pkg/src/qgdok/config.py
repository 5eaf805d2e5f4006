"""Application configuration: defaults < config file < environment."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import ChunkingConfig
from .providers import ProviderConfig, RetryPolicy

DEFAULT_DATA_DIR = "qgdok_data"
DEFAULT_K_RETRIEVE = 4
DEFAULT_PORT = 8080

ENV_DATA_DIR = "QGDOK_DATA_DIR"
ENV_MOCK = "QGDOK_MOCK"
ENV_EMBED_URL = "QGDOK_EMBED_URL"
ENV_EMBED_KEY = "QGDOK_EMBED_KEY"
ENV_LLM_URL = "QGDOK_LLM_URL"
ENV_LLM_KEY = "QGDOK_LLM_KEY"


@dataclass
class AppConfig:
    data_dir: Path = field(default_factory=lambda: Path(DEFAULT_DATA_DIR))
    chunking: ChunkingConfig = field(default_factory=ChunkingConfig)
    k_retrieve: int = DEFAULT_K_RETRIEVE
    providers: dict[str, ProviderConfig] = field(default_factory=dict)
    roles: dict[str, str] = field(default_factory=dict)  # embedder/generator/judge -> provider name
    bind_address: str = "127.0.0.1"
    port: int = DEFAULT_PORT
    mock_mode: bool = False
    embed_dim: int = 1536  # declared dim of the live embedding provider

    def provider_for(self, role: str) -> ProviderConfig:
        name = self.roles.get(role)
        if name is None or name not in self.providers:
            raise KeyError(f"no provider configured for role {role!r}")
        return self.providers[name]


def _provider_from_dict(name: str, raw: dict) -> ProviderConfig:
    retry_raw = raw.get("retry", {})
    return ProviderConfig(
        provider_id=raw.get("provider_id", name),
        model_id=raw["model_id"],
        endpoint=raw.get("endpoint", ""),
        api_key_ref=raw.get("api_key_ref", ""),
        temperature=raw.get("temperature"),
        max_output_tokens=raw.get("max_output_tokens", 2048),
        timeout=raw.get("timeout", 60.0),
        retry=RetryPolicy(
            max_attempts=retry_raw.get("max_attempts", 3),
            backoff_base=retry_raw.get("backoff_base", 0.5),
        ),
    )


def load_config(path: str | Path | None = None,
                env: dict[str, str] | None = None) -> AppConfig:
    """Build the effective config; environment variables override the file."""
    env = env if env is not None else dict(os.environ)
    cfg = AppConfig()

    if path is not None and Path(path).exists():
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        if "data_dir" in raw:
            cfg.data_dir = Path(raw["data_dir"])
        if "chunking" in raw:
            cfg.chunking = ChunkingConfig(
                window_tokens=raw["chunking"].get("window_tokens", cfg.chunking.window_tokens),
                stride_tokens=raw["chunking"].get("stride_tokens", cfg.chunking.stride_tokens),
            )
        cfg.k_retrieve = raw.get("k_retrieve", cfg.k_retrieve)
        cfg.bind_address = raw.get("server", {}).get("bind_address", cfg.bind_address)
        cfg.port = raw.get("server", {}).get("port", cfg.port)
        cfg.mock_mode = raw.get("mock_mode", cfg.mock_mode)
        cfg.embed_dim = raw.get("embed_dim", cfg.embed_dim)
        for name, praw in raw.get("providers", {}).items():
            cfg.providers[name] = _provider_from_dict(name, praw)
        cfg.roles.update(raw.get("roles", {}))

    if env.get(ENV_DATA_DIR):
        cfg.data_dir = Path(env[ENV_DATA_DIR])
    if env.get(ENV_MOCK):
        cfg.mock_mode = env[ENV_MOCK] not in ("0", "false", "")

    if not cfg.mock_mode:
        if env.get(ENV_EMBED_URL) or "embedder" not in cfg.roles:
            cfg.providers["embedder"] = ProviderConfig(
                provider_id="http-embed",
                model_id=env.get("QGDOK_EMBED_MODEL", "text-embedding-ada-002"),
                endpoint=env.get(ENV_EMBED_URL, ""),
                api_key_ref=ENV_EMBED_KEY,
            )
            cfg.roles["embedder"] = "embedder"
        if env.get(ENV_LLM_URL) or "generator" not in cfg.roles:
            llm = ProviderConfig(
                provider_id="http-chat",
                model_id=env.get("QGDOK_LLM_MODEL", "gpt-4o"),
                endpoint=env.get(ENV_LLM_URL, ""),
                api_key_ref=ENV_LLM_KEY,
            )
            cfg.providers["generator"] = llm
            cfg.roles.setdefault("generator", "generator")
            cfg.roles.setdefault("judge", "generator")
    return cfg
