"""TOML application config: named backends, thresholds, split ratios, service."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Union

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .gateway import BackendConfig, MockBackend, MockBehavior, mock_backend
from .pipeline import SplitRatios, SynthesisConfig


@dataclass(frozen=True)
class ServiceConfig:
    bind: str = "127.0.0.1"
    port: int = 8715
    allowed_origins: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not 1 <= self.port <= 65535:
            raise ValueError(f"port {self.port} out of range")


@dataclass(frozen=True)
class AppConfig:
    backends: Mapping[str, BackendConfig] = field(default_factory=dict)
    default_backend: str = "mock"
    lexicon_paths: Mapping[str, str] = field(default_factory=dict)
    synthesis: SynthesisConfig = field(default_factory=SynthesisConfig)
    split: SplitRatios = field(default_factory=SplitRatios)
    service: ServiceConfig = field(default_factory=ServiceConfig)

    def __post_init__(self) -> None:
        if self.default_backend not in self.backends and not _is_mock_name(
            self.default_backend
        ):
            raise ValueError(f"default_backend {self.default_backend!r} not configured")


def _is_mock_name(name: str) -> bool:
    return name == "mock" or name.startswith("mock:")


def load_app_config(path: Optional[Union[str, Path]] = None) -> AppConfig:
    """Parse the TOML config file; with no file, everything defaults (mock backend)."""
    if path is None:
        return AppConfig()
    data = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    backends = {}
    for name, raw in data.get("backends", {}).items():
        backends[name] = BackendConfig(
            name=name,
            base_url=raw["base_url"],
            model_id=raw["model_id"],
            api_key_ref=raw.get("api_key_ref", ""),
            max_concurrency=raw.get("max_concurrency", 4),
            timeout=raw.get("timeout", 30.0),
            temperature=raw.get("temperature", 0.0),
        )
    synthesis = SynthesisConfig(**data.get("synthesis", {}))
    split = SplitRatios(**data.get("split", {}))
    service_raw = data.get("service", {})
    service = ServiceConfig(
        bind=service_raw.get("bind", "127.0.0.1"),
        port=service_raw.get("port", 8715),
        allowed_origins=tuple(service_raw.get("allowed_origins", ())),
    )
    return AppConfig(
        backends=backends,
        default_backend=data.get("default_backend", "mock"),
        lexicon_paths=data.get("lexicons", {}),
        synthesis=synthesis,
        split=split,
        service=service,
    )


def resolve_backend(config: AppConfig, name: Optional[str] = None):
    """Map a backend name to a live handle. Mock variants are always available:
    mock, mock:perfect_extractor, mock:flag_missing, mock:hallucinate."""
    name = name or config.default_backend
    if _is_mock_name(name):
        if ":" in name:
            behavior = name.split(":", 1)[1]
            return mock_backend(MockBehavior[behavior.upper()])
        return MockBackend()
    if name not in config.backends:
        raise KeyError(f"backend {name!r} not configured")
    from .gateway import get_backend

    return get_backend(config.backends[name])
