"""Proximity integration module.

A slim full-context branch mirroring the base branch's stage structure with
c' = max(1, c // divisor) channels. Its per-stage features span the whole
context; at fusion time the padded-ROI footprint is cropped out (reflected
where the footprint crosses the border, identically to the RGB-side padding)
and summed into the leading c' channels of the base feature. A slim upsample
head produces the branch's own HR context output for the auxiliary loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from .backbone import ResidualBlock, UpsampleHead, bilinear_scale
from .core.image import PaddedBox, reflect_index


@dataclass
class PimOutputs:
    """Full-context stage features (one per backbone stage) plus optional Y-hat-P."""

    stage_features: list[torch.Tensor]
    sr_context: torch.Tensor | None = None


def crop_feature(p: torch.Tensor, box: PaddedBox) -> torch.Tensor:
    """Crop the padded-ROI footprint from a (B, c', H, W) feature map,
    mirror-reflecting where the footprint crosses the map border."""
    h, w = p.shape[-2:]
    rows = reflect_index(np.arange(box.top, box.top + box.height), h)
    cols = reflect_index(np.arange(box.left, box.left + box.width), w)
    rows = torch.as_tensor(rows, device=p.device)
    cols = torch.as_tensor(cols, device=p.device)
    return p.index_select(-2, rows).index_select(-1, cols)


def crop_fuse(z: torch.Tensor, p_stage: torch.Tensor, box: PaddedBox) -> torch.Tensor:
    """Sum the cropped context feature into the first c' channels of z."""
    c_slim = p_stage.shape[1]
    if c_slim > z.shape[1]:
        raise ValueError("PIM feature has more channels than the base feature")
    cropped = crop_feature(p_stage, box)
    if cropped.shape[-2:] != z.shape[-2:]:
        raise ValueError(
            f"footprint {cropped.shape[-2:]} does not match the base feature {z.shape[-2:]}"
        )
    return torch.cat([z[:, :c_slim] + cropped, z[:, c_slim:]], dim=1)


class ProximityBranch(nn.Module):
    def __init__(self, channels: int, blocks_per_stage: tuple[int, ...], scale: int):
        super().__init__()
        self.channels = channels
        self.scale = scale
        self.shallow = nn.Conv2d(3, channels, 3, padding=1)
        self.stages = nn.ModuleList(
            nn.Sequential(*[ResidualBlock(channels) for _ in range(n)])
            for n in blocks_per_stage
        )
        self.head = UpsampleHead(channels, scale)

    def forward(self, X: torch.Tensor, want_sr_context: bool = False) -> PimOutputs:
        """Run the slim branch over the full context, recording each stage.

        The HR context output is only materialized when requested (training).
        """
        z = self.shallow(X)
        feats = []
        for stage in self.stages:
            z = stage(z)
            feats.append(z)
        sr_context = None
        if want_sr_context:
            s = self.scale
            residual = bilinear_scale(X, X.shape[-2] * s, X.shape[-1] * s)
            sr_context = self.head(z) + residual
        return PimOutputs(stage_features=feats, sr_context=sr_context)
