"""Base branch: a small residual conv SR network with per-stage fusion hooks.

Each residual block is conv3x3 -> ReLU -> conv3x3 with an additive skip. All
stages are stride-1, so every stage feature keeps the input's spatial size;
the upsample head (pixel shuffle x2 per round) is the only scale change. A
bilinear global residual of the input RGB makes the untrained network output
a sensible image.
"""

from __future__ import annotations

from typing import Callable, Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import BackboneConfig

# A fuser receives (stage_index, feature) after each stage and returns the
# (possibly) enhanced feature.
Fuser = Callable[[int, torch.Tensor], torch.Tensor]


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x):
        return x + self.conv2(F.relu(self.conv1(x)))


def bilinear_scale(x: torch.Tensor, out_h: int, out_w: int) -> torch.Tensor:
    return F.interpolate(x, size=(out_h, out_w), mode="bilinear", align_corners=False)


class UpsampleHead(nn.Module):
    """log2(s) rounds of conv(c -> 4c) + PixelShuffle(2), then conv to out channels."""

    def __init__(self, channels: int, scale: int, out_channels: int = 3):
        super().__init__()
        if scale < 1 or scale & (scale - 1):
            raise ValueError(f"scale must be a power of 2, got {scale}")
        self.scale = scale
        rounds = []
        while scale > 1:
            rounds += [nn.Conv2d(channels, 4 * channels, 3, padding=1), nn.PixelShuffle(2)]
            scale //= 2
        self.rounds = nn.Sequential(*rounds)
        self.to_rgb = nn.Conv2d(channels, out_channels, 3, padding=1)

    def forward(self, z):
        return self.to_rgb(self.rounds(z))


class Backbone(nn.Module):
    def __init__(self, cfg: BackboneConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        c = cfg.channels
        self.shallow = nn.Conv2d(cfg.in_channels, c, 3, padding=1)
        self.stages = nn.ModuleList(
            nn.Sequential(*[ResidualBlock(c) for _ in range(n)])
            for n in cfg.blocks_per_stage
        )
        self.head = UpsampleHead(c, cfg.scale)

    @property
    def num_stages(self) -> int:
        return len(self.stages)

    def shallow_extract(self, rgb: torch.Tensor) -> torch.Tensor:
        return self.shallow(rgb)

    def run_stage(self, z: torch.Tensor, stage_index: int) -> torch.Tensor:
        return self.stages[stage_index](z)

    def upsample_head(self, z: torch.Tensor, rgb: torch.Tensor) -> torch.Tensor:
        s = self.cfg.scale
        residual = bilinear_scale(rgb, rgb.shape[-2] * s, rgb.shape[-1] * s)
        return self.head(z) + residual

    def forward(self, rgb: torch.Tensor, fusers: Sequence[Fuser] = ()) -> torch.Tensor:
        """SR the patch, letting each fuser enhance the feature after each stage.

        With no fusers this is exactly the pre-cropping baseline forward pass.
        """
        z = self.shallow_extract(rgb)
        for i in range(self.num_stages):
            z = self.run_stage(z, i)
            for fuse in fusers:
                z = fuse(i, z)
        return self.upsample_head(z, rgb)
