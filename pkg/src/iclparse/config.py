"""YAML run configuration with ``ICLPARSE_<SECTION>_<KEY>`` environment overrides."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

import yaml

from .cache import CacheConfig
from .llm_client import DEFAULT_INSTRUCTION, BackendConfig
from .preprocess import DatasetConfig
from .sampler import SamplerConfig

ENV_PREFIX = "ICLPARSE_"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SelectorConfig:
    k1: float = 1.2
    b: float = 0.75
    shots: int = 5
    ascending: bool = True

    def __post_init__(self) -> None:
        if self.shots < 0:
            raise ValueError(f"shots must be >= 0, got {self.shots}")


@dataclass(frozen=True)
class EmitterConfig:
    max_shot: Optional[int] = None  # falls back to selector.shots
    per_shot_count: Optional[int] = None


@dataclass(frozen=True)
class RunConfig:
    datasets: tuple[DatasetConfig, ...] = ()
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    cache: CacheConfig = field(default_factory=CacheConfig)
    selector: SelectorConfig = field(default_factory=SelectorConfig)
    backend: BackendConfig = field(default_factory=BackendConfig)
    emitter: EmitterConfig = field(default_factory=EmitterConfig)
    instruction: str = DEFAULT_INSTRUCTION
    output_dir: str = "out"
    seed: int = 0


def _coerce(value: str, current: Any) -> Any:
    if isinstance(current, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(current, int):
        return int(value)
    if isinstance(current, float):
        return float(value)
    if current is None and value.strip().lstrip("-").isdigit():
        return int(value)
    return value


def _section(cls, raw: Optional[Mapping], name: str, env: Mapping[str, str]):
    raw = dict(raw or {})
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(raw) - set(known)
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    defaults = cls()
    for key in known:
        env_key = f"{ENV_PREFIX}{name.upper()}_{key.upper()}"
        if env_key in env:
            raw[key] = _coerce(env[env_key], raw.get(key, getattr(defaults, key)))
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{name}]: {exc}") from exc


def load_config(path: Optional[str | Path] = None, env: Optional[Mapping[str, str]] = None) -> RunConfig:
    """Read a YAML config; relative file paths resolve against its directory."""
    env = os.environ if env is None else env
    data: dict = {}
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a mapping")
        base = path.resolve().parent

    def resolve(p: Optional[str]) -> Optional[str]:
        if p is None:
            return None
        return str(p) if Path(p).is_absolute() else str(base / p)

    datasets = []
    for item in data.get("datasets") or []:
        try:
            ds = DatasetConfig(**item)
        except TypeError as exc:
            raise ConfigError(f"bad dataset entry {item!r}: {exc}") from exc
        datasets.append(
            dataclasses.replace(
                ds, log_file_path=resolve(ds.log_file_path), ground_truth_path=resolve(ds.ground_truth_path)
            )
        )

    seed = int(env.get(f"{ENV_PREFIX}SEED", data.get("seed", 0)))
    sampler_raw = dict(data.get("sampler") or {})
    sampler_raw.setdefault("seed", seed)
    output_dir = env.get(f"{ENV_PREFIX}OUTPUT_DIR", data.get("output_dir", "out"))
    return RunConfig(
        datasets=tuple(datasets),
        sampler=_section(SamplerConfig, sampler_raw, "sampler", env),
        cache=_section(CacheConfig, data.get("cache"), "cache", env),
        selector=_section(SelectorConfig, data.get("selector"), "selector", env),
        backend=_section(BackendConfig, data.get("backend"), "backend", env),
        emitter=_section(EmitterConfig, data.get("emitter"), "emitter", env),
        instruction=data.get("instruction", DEFAULT_INSTRUCTION),
        output_dir=resolve(output_dir),
        seed=seed,
    )
