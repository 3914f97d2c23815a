"""Tiled patch-wise evaluation, trend sweeps, and the module ablation grid.

Every experiment produces an EvalReport: table-shaped rows plus enough
metadata (seed, config hash, version) to reproduce the run. Images are
top-left cropped to a multiple of the ROI size before tiling; metrics are
averaged over all tiles of all images with no border exclusion.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import __version__
from .config import ClsrConfig
from .core.image import RoiBox, SamplePair, crop, crop_hr
from .core.metrics import psnr, ssim
from .core.resize import bilinear_resize
from .flops import flops_estimate, post_crop_flops, pre_crop_flops
from .model import ClsrModel, to_image, to_tensor

ROW_FIELDS = ("method", "dataset", "roi_size", "pad", "psnr_mean", "ssim_mean", "flops_total")


def config_hash(cfg: ClsrConfig) -> str:
    blob = json.dumps(cfg.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


@dataclass
class EvalReport:
    rows: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add_row(self, **kwargs) -> None:
        row = {k: kwargs.get(k) for k in ROW_FIELDS}
        if math.isnan(row["psnr_mean"]):
            raise ValueError("psnr_mean must be finite or the infinity sentinel")
        if not -1.0 <= row["ssim_mean"] <= 1.0:
            raise ValueError(f"ssim_mean {row['ssim_mean']} outside [-1, 1]")
        self.rows.append(row)

    def to_json(self) -> str:
        return json.dumps({"rows": self.rows, "metadata": self.metadata}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        data = json.loads(text)
        return cls(rows=data["rows"], metadata=data["metadata"])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=ROW_FIELDS)
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "EvalReport":
        rows = []
        for rec in csv.DictReader(io.StringIO(text)):
            rows.append(
                {
                    "method": rec["method"],
                    "dataset": rec["dataset"],
                    "roi_size": int(rec["roi_size"]),
                    "pad": int(rec["pad"]),
                    "psnr_mean": float(rec["psnr_mean"]),
                    "ssim_mean": float(rec["ssim_mean"]),
                    "flops_total": int(rec["flops_total"]),
                }
            )
        return cls(rows=rows, metadata={})

    def save(self, path: str | Path) -> None:
        path = Path(path)
        if path.suffix == ".csv":
            path.write_text(self.to_csv())
        else:
            path.write_text(self.to_json())


def tile_image(h: int, w: int, roi: int) -> list[RoiBox]:
    """Exhaustive non-overlapping ROI grid covering an h x w image exactly."""
    if h % roi or w % roi:
        raise ValueError(
            f"image {h}x{w} is not a multiple of roi {roi}; crop it first "
            "(see crop_to_multiple)"
        )
    return [
        RoiBox(top, left, roi, roi)
        for top in range(0, h, roi)
        for left in range(0, w, roi)
    ]


def crop_to_multiple(pair: SamplePair, roi: int) -> SamplePair:
    """Top-left anchor crop so the LR dimensions become multiples of roi."""
    _, lh, lw = pair.lr.shape
    nh, nw = lh - lh % roi, lw - lw % roi
    if nh < roi or nw < roi:
        raise ValueError(f"LR image {lh}x{lw} is smaller than one {roi} tile")
    s = pair.scale
    return SamplePair(
        lr=pair.lr[:, :nh, :nw].copy(), hr=pair.hr[:, : nh * s, : nw * s].copy(), scale=s
    )


def _method_flops(method: str, cfg: ClsrConfig, roi: int, pad: int, ctx_hw: tuple[int, int],
                  use_gcm: bool, use_pim: bool) -> int:
    if method == "pre":
        return pre_crop_flops(cfg, roi, pad=pad)
    if method == "post":
        return post_crop_flops(cfg, ctx_hw)
    if method == "clsr":
        return flops_estimate(cfg, roi, ctx_hw, n_rois=1, pad=pad,
                              use_gcm=use_gcm, use_pim=use_pim).total
    if method == "bilinear":
        return 8 * 3 * (roi * cfg.backbone.scale) ** 2
    return 0  # gt debug method


@torch.no_grad()
def evaluate(
    model: ClsrModel,
    pairs: list[SamplePair],
    methods: tuple[str, ...] = ("pre", "post", "clsr"),
    roi_size: int = 24,
    pad: int = 8,
    dataset_name: str = "dataset",
) -> EvalReport:
    """Tile every image and score each method patch-wise; one row per method."""
    report = EvalReport(
        metadata={
            "seed": model.cfg.train.seed,
            "config_hash": config_hash(model.cfg),
            "version": __version__,
            "crop_anchor": "top-left",
        }
    )
    s = model.cfg.backbone.scale
    scores: dict[str, list[tuple[float, float]]] = {m: [] for m in methods}
    flops: dict[str, list[int]] = {m: [] for m in methods}
    for pair in pairs:
        pair = crop_to_multiple(pair, roi_size)
        _, lh, lw = pair.lr.shape
        tiles = tile_image(lh, lw, roi_size)
        X = to_tensor(pair.lr)
        artifacts = model.prepare_context(X) if "clsr" in methods else None
        sr_full = model.backbone(X, ()) if "post" in methods else None
        for m in methods:
            flops[m].append(_method_flops(m, model.cfg, roi_size, pad, (lh, lw),
                                          model.use_gcm, model.use_pim))
        for box in tiles:
            truth = crop_hr(pair.hr, box, s)
            for m in methods:
                if m == "clsr":
                    out = to_image(model.forward_roi(X, box, pad=pad, artifacts=artifacts).sr_roi)
                elif m == "pre":
                    out = to_image(model.pre_crop_forward(X, box, pad=pad))
                elif m == "post":
                    sb = box.scaled(s)
                    out = to_image(
                        sr_full[:, :, sb.top : sb.top + sb.height, sb.left : sb.left + sb.width]
                    )
                elif m == "bilinear":
                    out = bilinear_resize(crop(pair.lr, box), box.height * s, box.width * s)
                elif m == "gt":
                    out = truth
                else:
                    raise ValueError(f"unknown method {m!r}")
                scores[m].append((psnr(out, truth), ssim(out, truth)))
    for m in methods:
        ps = [p for p, _ in scores[m]]
        ss = [q for _, q in scores[m]]
        report.add_row(
            method=m,
            dataset=dataset_name,
            roi_size=roi_size,
            pad=pad,
            psnr_mean=float(np.mean(ps)),
            ssim_mean=float(np.mean(ss)),
            flops_total=int(np.mean(flops[m])),
        )
    return report


@torch.no_grad()
def sweep_input_size(
    model: ClsrModel,
    pairs: list[SamplePair],
    sizes: tuple[int, ...] = (96, 48, 24),
    dataset_name: str = "dataset",
) -> EvalReport:
    """Plain backbone on center crops of each size (no context, no padding)."""
    report = EvalReport(metadata={"config_hash": config_hash(model.cfg), "version": __version__})
    s = model.cfg.backbone.scale
    for size in sizes:
        vals = []
        for pair in pairs:
            _, lh, lw = pair.lr.shape
            if lh < size or lw < size:
                continue
            box = RoiBox((lh - size) // 2, (lw - size) // 2, size, size)
            out = model.restore_baseline(pair.lr, box, "pre", pad=0)
            truth = crop_hr(pair.hr, box, s)
            vals.append((psnr(out, truth), ssim(out, truth)))
        report.add_row(
            method=f"backbone@{size}",
            dataset=dataset_name,
            roi_size=size,
            pad=0,
            psnr_mean=float(np.mean([p for p, _ in vals])),
            ssim_mean=float(np.mean([q for _, q in vals])),
            flops_total=pre_crop_flops(model.cfg, size, pad=0),
        )
    return report


@torch.no_grad()
def sweep_context_size(
    model: ClsrModel,
    pairs: list[SamplePair],
    ratios: tuple[int, ...] = (1, 2, 4, 6, 8),
    roi_size: int = 24,
    pad: int = 8,
    dataset_name: str = "dataset",
) -> EvalReport:
    """Restrict the context to a centered ratio*roi window around a center ROI."""
    report = EvalReport(metadata={"config_hash": config_hash(model.cfg), "version": __version__})
    s = model.cfg.backbone.scale
    for ratio in ratios:
        vals = []
        win_hw = None
        for pair in pairs:
            _, lh, lw = pair.lr.shape
            win = min(ratio * roi_size, lh, lw)
            wtop, wleft = (lh - win) // 2, (lw - win) // 2
            window = RoiBox(wtop, wleft, win, win)
            ctx = crop(pair.lr, window)
            box = RoiBox((win - roi_size) // 2, (win - roi_size) // 2, roi_size, roi_size)
            sr = model.restore(ctx, box, pad=pad)
            truth_box = RoiBox(wtop + box.top, wleft + box.left, roi_size, roi_size)
            truth = crop_hr(pair.hr, truth_box, s)
            vals.append((psnr(sr, truth), ssim(sr, truth)))
            win_hw = (win, win)
        report.add_row(
            method=f"clsr@{ratio}x",
            dataset=dataset_name,
            roi_size=roi_size,
            pad=pad,
            psnr_mean=float(np.mean([p for p, _ in vals])),
            ssim_mean=float(np.mean([q for _, q in vals])),
            flops_total=flops_estimate(model.cfg, roi_size, win_hw, pad=pad).total,
        )
    return report


@torch.no_grad()
def sweep_padding(
    model: ClsrModel,
    pairs: list[SamplePair],
    pads: tuple[int, ...] = (0, 2, 4, 8, 12),
    roi_size: int = 24,
    dataset_name: str = "dataset",
) -> EvalReport:
    """One evaluate() row per padding size."""
    report = EvalReport(metadata={"config_hash": config_hash(model.cfg), "version": __version__})
    for pad in pads:
        sub = evaluate(model, pairs, methods=("clsr",), roi_size=roi_size, pad=pad,
                       dataset_name=dataset_name)
        row = sub.rows[0]
        row["method"] = f"clsr@pad{pad}"
        report.rows.append(row)
    return report


def run_ablation(
    train_pairs: list[SamplePair],
    eval_pairs: list[SamplePair],
    cfg: ClsrConfig,
    out_dir: str | Path | None = None,
    val_pairs: list[SamplePair] | None = None,
) -> EvalReport:
    """Train the 2x2 {PIM} x {GCM} grid seed-matched and evaluate each variant.

    Row order matches the module ablation table: off/off, PIM only, GCM only,
    both. The off/off variant is the bare backbone.
    """
    import copy

    from .train import train_loop

    grid = [(False, False), (True, False), (False, True), (True, True)]
    labels = ["base", "pim", "gcm", "pim+gcm"]
    report = EvalReport(
        metadata={"seed": cfg.train.seed, "config_hash": config_hash(cfg), "version": __version__}
    )
    for (use_pim, use_gcm), label in zip(grid, labels):
        variant = copy.deepcopy(cfg)
        variant.train.use_pim = use_pim
        variant.train.use_gcm = use_gcm
        sub_dir = None if out_dir is None else Path(out_dir) / f"ablate_{label.replace('+', '_')}"
        model, _ = train_loop(train_pairs, variant, out_dir=sub_dir, val_pairs=val_pairs)
        sub = evaluate(
            model, eval_pairs, methods=("clsr",), roi_size=cfg.eval.roi, pad=cfg.eval.pad
        )
        row = sub.rows[0]
        row["method"] = label
        report.rows.append(row)
    return report
