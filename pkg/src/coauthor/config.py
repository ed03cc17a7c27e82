"""Engine configuration.

Everything lives in one YAML file. Every field has a default so the engine
runs fully offline with the mock provider when no config is given.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ValidationError

CONFIG_ENV = "COAUTHOR_CONFIG"
DEFAULT_API_KEY_ENV = "COAUTHOR_API_KEY"


@dataclass
class StoreConfig:
    root: str = "workspace"


@dataclass
class ProfileConfig:
    model_tag: str = ""
    dim: int = 0


@dataclass
class ProvidersConfig:
    kind: str = "mock"  # mock | http
    base_url: str = "http://localhost:8080/v1"
    api_key_env: str = DEFAULT_API_KEY_ENV
    chat_model: str = "mock-chat-1"
    mock_chat_mode: str = "template"
    linking: ProfileConfig = field(default_factory=lambda: ProfileConfig("bge-m3", 1024))
    heading_eval: ProfileConfig = field(
        default_factory=lambda: ProfileConfig("bge-large-en-v1.5", 1024)
    )
    max_concurrency: int = 4
    max_retries: int = 2
    rps: float = 0.0  # 0 disables rate limiting
    max_batch: int = 64
    timeout_seconds: float = 120.0
    cache_dir: str = ""  # empty: <store.root>/.embedding-cache


@dataclass
class IngestConfig:
    window: int = 3
    overlap: int = 1
    pdf_command: str = ""  # e.g. "pdf2md {input} {output}"
    abbreviations: str = ""  # file with one abbreviation per line; empty: built-ins


@dataclass
class IndexConfig:
    nlist: int = 0  # 0: max(1, round(sqrt(N)))
    nprobe: int = 0  # 0: max(1, nlist // 8)
    seed: int = 0


@dataclass
class CompressorConfig:
    target_words: int = 4000
    context_budget_tokens: int = 24000


@dataclass
class GeneratorConfig:
    batch_limit: int = 40
    min_words_hint: int = 8000
    temperature: float = 0.3
    max_tokens: int = 16384


@dataclass
class LinkerConfig:
    threshold: float = 0.55
    top_k: int = 5
    # Relaxed rule: count a citation as traceable when the best hit comes from
    # any document, not only the cited one. Off by default.
    match_any_document: bool = False


@dataclass
class MetricsConfig:
    # "printed" is (n - s) / s. The alternatives (n - s) / n and (m - s) / m
    # are offered for sensitivity analysis and labeled as such in reports.
    correction_mode: str = "printed"


@dataclass
class ApiConfig:
    host: str = "127.0.0.1"
    port: int = 8040
    workers: int = 2


@dataclass
class PromptsConfig:
    dir: str = ""  # empty: packaged prompt files


@dataclass
class Config:
    store: StoreConfig = field(default_factory=StoreConfig)
    providers: ProvidersConfig = field(default_factory=ProvidersConfig)
    ingest: IngestConfig = field(default_factory=IngestConfig)
    index: IndexConfig = field(default_factory=IndexConfig)
    compressor: CompressorConfig = field(default_factory=CompressorConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    linker: LinkerConfig = field(default_factory=LinkerConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    api: ApiConfig = field(default_factory=ApiConfig)
    prompts: PromptsConfig = field(default_factory=PromptsConfig)

    def embedding_cache_dir(self) -> Path:
        if self.providers.cache_dir:
            return Path(self.providers.cache_dir)
        return Path(self.store.root) / ".embedding-cache"


def _build(cls, data, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ValidationError(f"config section '{where}' must be a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ValidationError(f"unknown config key '{where}.{key}'")
        f = known[key]
        if dataclasses.is_dataclass(f.type) or (
            isinstance(f.type, str) and f.type in _SECTION_TYPES
        ):
            section_cls = _SECTION_TYPES[f.type] if isinstance(f.type, str) else f.type
            kwargs[key] = _build(section_cls, value, f"{where}.{key}")
        else:
            kwargs[key] = value
    return cls(**kwargs)


_SECTION_TYPES = {
    cls.__name__: cls
    for cls in (
        StoreConfig,
        ProfileConfig,
        ProvidersConfig,
        IngestConfig,
        IndexConfig,
        CompressorConfig,
        GeneratorConfig,
        LinkerConfig,
        MetricsConfig,
        ApiConfig,
        PromptsConfig,
    )
}


def load_config(path: str | Path | None = None) -> Config:
    """Load configuration from a YAML file.

    Resolution order: explicit path, the COAUTHOR_CONFIG environment
    variable, then built-in defaults.
    """
    if path is None:
        path = os.environ.get(CONFIG_ENV) or None
    if path is None:
        return Config()
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"config file not found: {p}")
    data = yaml.safe_load(p.read_text(encoding="utf-8"))
    if data is None:
        return Config()
    return _build(Config, data, "config")
