"""Analytical FLOPs accounting for every branch.

Conventions (fixed so numbers are reproducible):
- 1 multiply-accumulate = 2 FLOPs
- conv k x k, C_in -> C_out over an H' x W' output: 2 * k^2 * C_in * C_out * H' * W'
- transposed conv counted over its input grid: 2 * k^2 * C_in * C_out * H_in * W_in
- attention projections are per-pixel c x c matmuls; QK^T and attn @ V cost
  2 * n_query * n_key * c each
- bilinear resampling: 8 FLOPs per output pixel per channel
- ReLU and element-wise adds are ignored (dominated)

The `base` bucket is the per-ROI increment: everything recomputed for each
restoration (base branch plus the query-side attention work). The `gcm` and
`pim` buckets are the one-time context costs (bank extraction; slim branch
stage features) that a session computes once and reuses.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import ClsrConfig
from .core.image import RoiBox, grow_box
from .gcm import partition_starts


@dataclass(frozen=True)
class FlopsBreakdown:
    base: int
    gcm: int
    pim: int

    @property
    def total(self) -> int:
        return self.base + self.gcm + self.pim

    def to_dict(self) -> dict[str, int]:
        return {"base": self.base, "gcm": self.gcm, "pim": self.pim, "total": self.total}


def conv2d_flops(k: int, c_in: int, c_out: int, out_h: int, out_w: int) -> int:
    return 2 * k * k * c_in * c_out * out_h * out_w


def conv_transpose2d_flops(k: int, c_in: int, c_out: int, in_h: int, in_w: int) -> int:
    return 2 * k * k * c_in * c_out * in_h * in_w


def bilinear_flops(channels: int, out_h: int, out_w: int) -> int:
    return 8 * channels * out_h * out_w


def matmul_flops(n_query: int, n_key: int, c: int) -> int:
    return 2 * n_query * n_key * c


def _head_flops(c: int, scale: int, h: int, w: int, out_channels: int = 3) -> int:
    total = 0
    while scale > 1:
        total += conv2d_flops(3, c, 4 * c, h, w)
        h, w, scale = h * 2, w * 2, scale // 2
    total += conv2d_flops(3, c, out_channels, h, w)
    total += bilinear_flops(out_channels, h, w)  # global residual
    return total


def _trunk_flops(c: int, in_channels: int, blocks: int, h: int, w: int) -> int:
    return conv2d_flops(3, in_channels, c, h, w) + blocks * 2 * conv2d_flops(3, c, c, h, w)


def backbone_flops(cfg: ClsrConfig, h: int, w: int) -> int:
    b = cfg.backbone
    return _trunk_flops(b.channels, b.in_channels, sum(b.blocks_per_stage), h, w) + _head_flops(
        b.channels, b.scale, h, w
    )


def pim_context_flops(cfg: ClsrConfig, context_h: int, context_w: int) -> int:
    """Stage features over the full context; the slim HR head only runs in training."""
    c_slim = cfg.pim.slim_channels(cfg.backbone.channels)
    return _trunk_flops(c_slim, 3, sum(cfg.backbone.blocks_per_stage), context_h, context_w)


def gcm_context_flops(cfg: ClsrConfig, context_h: int, context_w: int) -> int:
    """One-time bank extraction: G over every sampled r x r patch."""
    g = cfg.gcm
    n = len(partition_starts(context_h, context_w, g.r, g.n_max))
    per_patch = _trunk_flops(cfg.backbone.channels, 3, cfg.backbone.blocks_per_stage[0], g.r, g.r)
    return n * per_patch


def gcm_roi_flops(cfg: ClsrConfig, patch_h: int, patch_w: int, context_h: int, context_w: int) -> int:
    """Query-side attention work, recomputed for every restored ROI."""
    c = cfg.backbone.channels
    g = cfg.gcm
    f = g.factor
    n = len(partition_starts(context_h, context_w, g.r, g.n_max))
    hq, wq = patch_h // f, patch_w // f
    kd = g.r // f
    nq, nk = hq * wq, n * kd * kd

    total = conv2d_flops(3, c, c, hq, wq) + bilinear_flops(c, hq, wq)  # scale_down(z)
    total += n * (conv2d_flops(3, c, c, kd, kd) + bilinear_flops(c, kd, kd))  # bank down
    total += 2 * c * c * nq  # Q projection
    total += 2 * c * c * nk * 2  # K and V projections
    total += matmul_flops(nq, nk, c) * 2  # QK^T and attn @ V
    total += conv_transpose2d_flops(2 * f, c, c, hq, wq) + bilinear_flops(c, patch_h, patch_w)
    return total


def roi_increment_flops(
    cfg: ClsrConfig,
    roi_h: int,
    roi_w: int,
    context_h: int,
    context_w: int,
    pad: int,
    use_gcm: bool = True,
) -> int:
    g = grow_box(RoiBox(0, 0, roi_h, roi_w), pad, align=cfg.gcm.factor)
    total = backbone_flops(cfg, g.height, g.width)
    if use_gcm:
        total += gcm_roi_flops(cfg, g.height, g.width, context_h, context_w)
    return total


def context_flops(
    cfg: ClsrConfig,
    context_h: int,
    context_w: int,
    use_gcm: bool = True,
    use_pim: bool = True,
) -> FlopsBreakdown:
    return FlopsBreakdown(
        base=0,
        gcm=gcm_context_flops(cfg, context_h, context_w) if use_gcm else 0,
        pim=pim_context_flops(cfg, context_h, context_w) if use_pim else 0,
    )


def flops_estimate(
    cfg: ClsrConfig,
    roi_size: int | tuple[int, int],
    context_size: int | tuple[int, int],
    n_rois: int = 1,
    pad: int | None = None,
    use_gcm: bool = True,
    use_pim: bool = True,
) -> FlopsBreakdown:
    """Analytical cost of restoring n_rois boxes in one context.

    The base bucket scales with n_rois; the context buckets are one-time.
    """
    roi_h, roi_w = (roi_size, roi_size) if isinstance(roi_size, int) else roi_size
    ctx_h, ctx_w = (context_size, context_size) if isinstance(context_size, int) else context_size
    if roi_h < 1 or roi_w < 1 or ctx_h < 1 or ctx_w < 1:
        raise ValueError("sizes must be positive")
    if pad is None:
        pad = cfg.eval.pad
    ctx = context_flops(cfg, ctx_h, ctx_w, use_gcm=use_gcm, use_pim=use_pim)
    per_roi = roi_increment_flops(cfg, roi_h, roi_w, ctx_h, ctx_w, pad, use_gcm=use_gcm)
    return FlopsBreakdown(base=n_rois * per_roi, gcm=ctx.gcm, pim=ctx.pim)


def pre_crop_flops(cfg: ClsrConfig, roi_size: int | tuple[int, int], pad: int | None = None) -> int:
    """Pre-cropping baseline: the backbone over one padded ROI."""
    roi_h, roi_w = (roi_size, roi_size) if isinstance(roi_size, int) else roi_size
    if pad is None:
        pad = cfg.eval.pad
    g = grow_box(RoiBox(0, 0, roi_h, roi_w), pad, align=cfg.gcm.factor)
    return backbone_flops(cfg, g.height, g.width)


def post_crop_flops(cfg: ClsrConfig, context_size: int | tuple[int, int]) -> int:
    """Post-cropping baseline: the backbone over the entire context."""
    ctx_h, ctx_w = (context_size, context_size) if isinstance(context_size, int) else context_size
    return backbone_flops(cfg, ctx_h, ctx_w)
