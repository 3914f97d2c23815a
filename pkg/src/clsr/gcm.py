"""Global context module.

The context image is partitioned into non-overlapping r x r patches; a small
feature extractor turns a uniformly sampled subset of them into a bank of
independent features. The ROI feature retrieves from the bank via multi-head
cross-attention whose logits carry a learnable distance bias, after both
sides are shrunk by a zero-initialized conv + bilinear-residual scaler. The
retrieved feature is scaled back up the same way and added to the base
branch once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .backbone import ResidualBlock, bilinear_scale


def partition_starts(h: int, w: int, r: int, n_max: int) -> np.ndarray:
    """Top-left corners of the sampled patch grid, as an (N, 2) int array.

    The full grid has floor(h/r) x floor(w/r) cells (remainder pixels are
    dropped). If that exceeds n_max, a uniform stride-k subgrid is kept, with
    the smallest k whose subgrid fits the cap.
    """
    if h < r or w < r:
        raise ValueError(f"context {h}x{w} is smaller than the patch size {r}")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    gh, gw = h // r, w // r
    k = 1
    while math.ceil(gh / k) * math.ceil(gw / k) > n_max:
        k += 1
    rows = np.arange(0, gh, k) * r
    cols = np.arange(0, gw, k) * r
    starts = np.stack(np.meshgrid(rows, cols, indexing="ij"), axis=-1)
    return starts.reshape(-1, 2)


def patch_centers(starts: np.ndarray, r: int) -> np.ndarray:
    return starts + r // 2


def partition_and_sample(X: np.ndarray, r: int, n_max: int) -> list[tuple[np.ndarray, tuple[int, int]]]:
    """Deterministically sample r x r RGB patches with their center coordinates."""
    _, h, w = X.shape
    starts = partition_starts(h, w, r, n_max)
    centers = patch_centers(starts, r)
    return [
        (X[:, y : y + r, x : x + r].copy(), (int(cy), int(cx)))
        for (y, x), (cy, cx) in zip(starts, centers)
    ]


@dataclass
class ContextBank:
    """Immutable bank of N patch features extracted from one context image.

    features: (B, N, c, r, r); centers: (N, 2) LR pixel coordinates (row, col);
    the context size is kept for the distance-bias normalization.
    """

    features: torch.Tensor
    centers: torch.Tensor
    r: int
    context_h: int
    context_w: int

    @property
    def size(self) -> int:
        return self.features.shape[1]

    @property
    def diag(self) -> float:
        return math.hypot(self.context_h, self.context_w)


class BankExtractor(nn.Module):
    """Feature extractor G: mirrors the backbone's head stage, with its own weights."""

    def __init__(self, channels: int, blocks: int, in_channels: int = 3):
        super().__init__()
        self.shallow = nn.Conv2d(in_channels, channels, 3, padding=1)
        self.blocks = nn.Sequential(*[ResidualBlock(channels) for _ in range(blocks)])

    def forward(self, patches: torch.Tensor) -> torch.Tensor:
        """(B, N, 3, r, r) -> (B, N, c, r, r); patches stay mutually independent."""
        b, n = patches.shape[:2]
        flat = patches.reshape(b * n, *patches.shape[2:])
        feats = self.blocks(self.shallow(flat))
        return feats.reshape(b, n, *feats.shape[1:])


class Scaler(nn.Module):
    """Down/up rescaling as zero-initialized conv plus a bilinear residual.

    At initialization both conv contributions are exactly zero, so the module
    is a pure bilinear rescale; training learns deviations from it.
    """

    def __init__(self, channels: int, factor: int = 2):
        super().__init__()
        if factor < 2 or factor % 2:
            raise ValueError(f"factor must be even and >= 2, got {factor}")
        self.factor = factor
        self.down = nn.Conv2d(channels, channels, 3, stride=factor, padding=1)
        self.up = nn.ConvTranspose2d(channels, channels, 2 * factor, stride=factor, padding=factor // 2)
        for conv in (self.down, self.up):
            nn.init.zeros_(conv.weight)
            nn.init.zeros_(conv.bias)

    def scale_down(self, t: torch.Tensor) -> torch.Tensor:
        h, w = t.shape[-2:]
        if h % self.factor or w % self.factor:
            raise ValueError(f"size {h}x{w} not divisible by factor {self.factor}")
        out = (h // self.factor, w // self.factor)
        return self.down(t) + bilinear_scale(t, *out)

    def scale_up(self, t: torch.Tensor) -> torch.Tensor:
        h, w = t.shape[-2:]
        return self.up(t) + bilinear_scale(t, h * self.factor, w * self.factor)


class CrossAttention(nn.Module):
    """Multi-head cross-attention from ROI query pixels to all bank key pixels.

    Per head: logit(q, k) = alpha + beta * (q . k) / sqrt(c_head) + bias(q, k)
    with bias(q, k) = -gamma * dist(query LR position, key patch center) / diag.
    Softmax runs over the union of every key pixel of every bank patch.
    """

    def __init__(self, channels: int, heads: int):
        super().__init__()
        if channels % heads:
            raise ValueError("channels must be divisible by heads")
        self.channels = channels
        self.heads = heads
        self.w_q = nn.Linear(channels, channels, bias=False)
        self.w_k = nn.Linear(channels, channels, bias=False)
        self.w_v = nn.Linear(channels, channels, bias=False)
        self.alpha = nn.Parameter(torch.zeros(heads))
        self.beta = nn.Parameter(torch.ones(heads))
        self.gamma_bias = nn.Parameter(torch.ones(()))

    def distance_bias(
        self,
        hq: int,
        wq: int,
        query_origin: tuple[float, float],
        query_stride: int,
        key_centers: torch.Tensor,
        keys_per_patch: int,
        diag: float,
        dtype: torch.dtype,
    ) -> torch.Tensor:
        """(nq, nk) additive bias; larger (less negative) for nearer keys."""
        f = query_stride
        half = (f - 1) / 2.0
        qy = query_origin[0] + torch.arange(hq, dtype=dtype) * f + half
        qx = query_origin[1] + torch.arange(wq, dtype=dtype) * f + half
        qpos = torch.stack(torch.meshgrid(qy, qx, indexing="ij"), dim=-1).reshape(-1, 2)
        kpos = key_centers.to(dtype).repeat_interleave(keys_per_patch, dim=0)
        dist = torch.cdist(qpos.unsqueeze(0), kpos.unsqueeze(0)).squeeze(0)
        return -self.gamma_bias * dist / diag

    def forward(
        self,
        z_down: torch.Tensor,
        bank_down: torch.Tensor,
        key_centers: torch.Tensor,
        query_origin: tuple[float, float],
        query_stride: int,
        diag: float,
        return_weights: bool = False,
    ):
        b, c, hq, wq = z_down.shape
        n, kh, kw = bank_down.shape[1], bank_down.shape[-2], bank_down.shape[-1]
        if bank_down.shape[2] != c:
            raise ValueError("bank feature channels do not match the query feature")
        if n < 1:
            raise ValueError("empty context bank")
        heads, ch = self.heads, c // self.heads
        nq, nk = hq * wq, n * kh * kw

        q = z_down.permute(0, 2, 3, 1).reshape(b, nq, c)
        k = bank_down.permute(0, 1, 3, 4, 2).reshape(b, nk, c)
        Q = self.w_q(q).reshape(b, nq, heads, ch).transpose(1, 2)  # (B,H,nq,ch)
        K = self.w_k(k).reshape(b, nk, heads, ch).transpose(1, 2)
        V = self.w_v(k).reshape(b, nk, heads, ch).transpose(1, 2)

        sim = Q @ K.transpose(-2, -1) / math.sqrt(ch)  # (B,H,nq,nk)
        bias = self.distance_bias(
            hq, wq, query_origin, query_stride, key_centers, kh * kw, diag, z_down.dtype
        )
        logits = (
            self.alpha.view(1, heads, 1, 1)
            + self.beta.view(1, heads, 1, 1) * sim
            + bias.unsqueeze(0).unsqueeze(0)
        )
        attn = torch.softmax(logits, dim=-1)
        g = (attn @ V).transpose(1, 2).reshape(b, nq, c)
        g = g.permute(0, 2, 1).reshape(b, c, hq, wq)
        if return_weights:
            return g, attn
        return g


class GlobalContextModule(nn.Module):
    def __init__(
        self,
        channels: int,
        extractor_blocks: int,
        heads: int = 2,
        factor: int = 2,
        r: int = 6,
        n_max: int = 256,
    ):
        super().__init__()
        self.r = r
        self.n_max = n_max
        self.factor = factor
        self.extractor = BankExtractor(channels, extractor_blocks)
        self.attention = CrossAttention(channels, heads)
        self.scaler = Scaler(channels, factor)

    def build_bank(self, X: torch.Tensor, feature_fn=None) -> ContextBank:
        """Partition a (B, 3, H, W) context and extract the feature bank once.

        feature_fn overrides the built-in extractor (used when weights are
        shared with the backbone's first stage).
        """
        b, ch_in, h, w = X.shape
        starts = partition_starts(h, w, self.r, self.n_max)
        centers = patch_centers(starts, self.r)
        # starts form a row-major subgrid of the full non-overlapping grid
        row_sel = torch.as_tensor(np.unique(starts[:, 0]) // self.r, device=X.device)
        col_sel = torch.as_tensor(np.unique(starts[:, 1]) // self.r, device=X.device)
        grid = X.unfold(2, self.r, self.r).unfold(3, self.r, self.r)  # (B,C,gh,gw,r,r)
        patches = grid.index_select(2, row_sel).index_select(3, col_sel)
        patches = patches.permute(0, 2, 3, 1, 4, 5).reshape(b, len(starts), ch_in, self.r, self.r)
        feats = feature_fn(patches) if feature_fn is not None else self.extractor(patches)
        return ContextBank(
            features=feats,
            centers=torch.as_tensor(centers, dtype=torch.float32, device=X.device),
            r=self.r,
            context_h=h,
            context_w=w,
        )

    def forward(
        self,
        z: torch.Tensor,
        bank: ContextBank,
        patch_origin: tuple[float, float],
        return_weights: bool = False,
    ):
        """Shrink, retrieve, and blow back up: returns g-up with z's shape."""
        zd = self.scaler.scale_down(z)
        b, n = bank.features.shape[:2]
        flat = bank.features.reshape(b * n, *bank.features.shape[2:])
        bank_down = self.scaler.scale_down(flat).reshape(b, n, -1, bank.r // self.factor, bank.r // self.factor)
        out = self.attention(
            zd,
            bank_down,
            bank.centers,
            patch_origin,
            self.factor,
            bank.diag,
            return_weights=return_weights,
        )
        if return_weights:
            g, weights = out
            return self.scaler.scale_up(g), weights
        return self.scaler.scale_up(out)
