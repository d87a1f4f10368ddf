"""Model hyperparameters, JSON (de)serialization and ``key=value`` overrides."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, fields

from .errors import ConfigError


@dataclass(frozen=True)
class ModelConfig:
    """One network instance's hyperparameters; defaults are the standard four-block setup."""

    sample_rate: int = 16000
    window: int = 256
    hop: int = 128
    audio_channels: int = 256
    block_channels: int = 64
    compress_depth: int = 2
    sru_hidden: int = 32
    sru_layers: int = 4
    unfold_kernel: int = 8
    unfold_stride: int = 1
    attn_heads: int = 4
    attn_qk_channels: int = 4
    fusion_heads: int = 4
    visual_channels: int = 512
    vp_hidden: int = 64
    vp_depth: int = 4
    vp_heads: int = 8
    vp_ffn: int = 128
    num_blocks: int = 4

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{f.name} must be a positive integer, got {v!r}")
        if self.audio_channels % 2:
            raise ConfigError("audio_channels must be even (real/imaginary halves)")
        if self.visual_channels % self.audio_channels:
            raise ConfigError("visual_channels must be divisible by audio_channels")
        if self.block_channels >= self.audio_channels:
            raise ConfigError("block_channels must be smaller than audio_channels")
        if self.block_channels % self.attn_heads:
            raise ConfigError("block_channels must be divisible by attn_heads")
        if self.vp_hidden % self.vp_heads:
            raise ConfigError("vp_hidden must be divisible by vp_heads")
        if self.window % 2 or self.hop > self.window:
            raise ConfigError("window must be even and hop must not exceed it")

    @property
    def freq_bins(self) -> int:
        return self.window // 2 + 1

    def frames(self, num_samples: int) -> int:
        return num_samples // self.hop + 1

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = [k for k in data if resolve_key(k) not in known]
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**{resolve_key(k): v for k, v in data.items()})

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config JSON must be an object")
        return cls.from_dict(data)

    def with_overrides(self, assignments) -> "ModelConfig":
        """Apply ``key=value`` strings (integers only) on top of this config."""
        data = self.to_dict()
        for item in assignments:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"override {item!r} is not of the form key=value")
            name = resolve_key(key.strip())
            if name not in data:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                data[name] = int(value)
            except ValueError as exc:
                raise ConfigError(f"override {item!r}: value must be an integer") from exc
        return ModelConfig(**data)


# Short symbols accepted wherever a config key is expected.
ALIASES = {
    "R": "num_blocks",
    "q": "compress_depth",
    "D": "block_channels",
    "C_a": "audio_channels",
    "C_v": "visual_channels",
    "h_a": "sru_hidden",
    "h": "fusion_heads",
    "q_v": "vp_depth",
}


def resolve_key(key: str) -> str:
    return ALIASES.get(key, key)


def load_config(path) -> ModelConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return ModelConfig.from_json(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
