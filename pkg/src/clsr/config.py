"""Configuration tree: one JSON file with a section per module.

Flags given on the CLI override file values; the effective config is dumped
next to every output artifact so runs can be reproduced from it.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any


@dataclass
class BackboneConfig:
    channels: int = 32
    blocks_per_stage: tuple[int, ...] = (2, 2, 2)
    scale: int = 4
    in_channels: int = 3

    def validate(self) -> None:
        if self.channels < 1:
            raise ValueError("backbone.channels must be >= 1")
        if not self.blocks_per_stage or any(n < 1 for n in self.blocks_per_stage):
            raise ValueError("every stage needs at least one block")
        if self.scale not in (2, 4):
            raise ValueError(f"scale must be 2 or 4, got {self.scale}")


@dataclass
class GcmConfig:
    r: int = 6                 # context patch side
    n_max: int = 256           # bank size cap
    heads: int = 2
    factor: int = 2            # attention down/up-sampling factor
    fuse_stage: int = 1        # backbone stage after which g is added
    share_extractor: bool = False

    def validate(self, backbone: BackboneConfig) -> None:
        if self.r < 1 or self.n_max < 1 or self.heads < 1 or self.factor < 1:
            raise ValueError("gcm sizes must be positive")
        if backbone.channels % self.heads:
            raise ValueError("backbone.channels must be divisible by gcm.heads")
        if self.r % self.factor:
            raise ValueError("gcm.r must be divisible by gcm.factor")
        if not 0 <= self.fuse_stage < len(backbone.blocks_per_stage):
            raise ValueError("gcm.fuse_stage out of range")


@dataclass
class PimConfig:
    channel_divisor: int = 10

    def slim_channels(self, backbone_channels: int) -> int:
        # floor with minimum 1; always strictly slimmer than the base branch
        return max(1, backbone_channels // self.channel_divisor)

    def validate(self, backbone: BackboneConfig) -> None:
        if self.channel_divisor < 2:
            raise ValueError("pim.channel_divisor must be >= 2")
        if self.slim_channels(backbone.channels) >= backbone.channels:
            raise ValueError("PIM must have fewer channels than the base branch")


@dataclass
class TrainConfig:
    context_patch: int = 54
    roi_patch: int = 48
    pad: int = 8
    iters: int = 5000
    pretrain_iters: int = 2000  # backbone-only warmup before GCM/PIM attach
    batch_size: int = 8
    lr: float = 1e-4
    lambda_start: float = 0.5
    lambda_decay: str = "linear"  # linear | cosine | step
    seed: int = 0
    val_every: int = 500
    ckpt_every: int = 1000
    use_gcm: bool = True
    use_pim: bool = True

    def validate(self) -> None:
        if self.roi_patch > self.context_patch:
            raise ValueError("roi_patch must fit inside context_patch")
        if (self.context_patch - self.roi_patch) % 2:
            raise ValueError("context_patch - roi_patch must be even (centered ROI)")
        if self.lambda_decay not in ("linear", "cosine", "step"):
            raise ValueError(f"unknown lambda_decay {self.lambda_decay!r}")
        if self.iters < 1 or self.batch_size < 1:
            raise ValueError("iters and batch_size must be positive")
        if self.pretrain_iters < 0:
            # pretrain_iters >= iters means the context modules never attach
            raise ValueError("pretrain_iters must be >= 0")


@dataclass
class EvalConfig:
    roi: int = 24
    pad: int = 8
    methods: tuple[str, ...] = ("pre", "post", "clsr")


@dataclass
class ServiceConfig:
    max_pixels: int = 4096 * 4096
    max_sessions: int = 16
    idle_ttl_s: float = 900.0
    default_pad: int = 8


@dataclass
class ClsrConfig:
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    gcm: GcmConfig = field(default_factory=GcmConfig)
    pim: PimConfig = field(default_factory=PimConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)

    def validate(self) -> "ClsrConfig":
        self.backbone.validate()
        self.gcm.validate(self.backbone)
        self.pim.validate(self.backbone)
        self.train.validate()
        return self

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


_SECTIONS = {
    "backbone": BackboneConfig,
    "gcm": GcmConfig,
    "pim": PimConfig,
    "train": TrainConfig,
    "eval": EvalConfig,
    "service": ServiceConfig,
}

_TUPLE_FIELDS = {"blocks_per_stage", "methods"}


def config_from_dict(data: dict[str, Any]) -> ClsrConfig:
    cfg = ClsrConfig()
    for section, cls in _SECTIONS.items():
        if section not in data:
            continue
        entries = dict(data[section])
        valid = {f.name for f in dataclasses.fields(cls)}
        unknown = set(entries) - valid
        if unknown:
            raise ValueError(f"unknown keys in [{section}]: {sorted(unknown)}")
        for key in _TUPLE_FIELDS & set(entries):
            entries[key] = tuple(entries[key])
        setattr(cfg, section, cls(**entries))
    return cfg.validate()


def load_config(path: str | Path | None) -> ClsrConfig:
    if path is None:
        return ClsrConfig().validate()
    return config_from_dict(json.loads(Path(path).read_text()))


def apply_overrides(cfg: ClsrConfig, overrides: dict[str, Any]) -> ClsrConfig:
    """Apply dotted-key overrides like {"train.iters": 100}; None values are skipped."""
    for key, value in overrides.items():
        if value is None:
            continue
        section, _, name = key.partition(".")
        target = getattr(cfg, section)
        if not hasattr(target, name):
            raise ValueError(f"unknown config key {key!r}")
        if name in _TUPLE_FIELDS and not isinstance(value, tuple):
            value = tuple(value)
        setattr(target, name, value)
    return cfg.validate()
