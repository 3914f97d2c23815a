"""Patch-sampled training with the two-term L1 objective and annealed lambda.

Training follows a two-phase recipe: the bare backbone is first trained on
the pre-cropping task, then GCM/PIM (with zero-initialized scalers) attach
and the full model fine-tunes. Runs are fully reproducible from the seed.
"""

from __future__ import annotations

import json
import math
import time
from pathlib import Path

import numpy as np
import torch

from .config import ClsrConfig
from .core.image import RoiBox, SamplePair, crop, crop_hr
from .core.metrics import psnr
from .model import ClsrModel, to_tensor
from .weights import save_weights, state_dict_to_numpy


class TrainingDiverged(RuntimeError):
    """Raised on a non-finite loss, carrying per-parameter gradient norms."""

    def __init__(self, iteration: int, grad_norms: dict[str, float]):
        self.iteration = iteration
        self.grad_norms = grad_norms
        worst = sorted(grad_norms.items(), key=lambda kv: -kv[1])[:8]
        super().__init__(
            f"non-finite loss at iter {iteration}; largest grad norms: {worst}"
        )


def lambda_schedule(iteration: int, total: int, lambda_start: float, kind: str = "linear") -> float:
    """Anneal the context-loss weight from lambda_start at iter 0 to 0 at `total`."""
    if not 0 <= iteration <= total:
        raise ValueError(f"iteration {iteration} outside [0, {total}]")
    frac = iteration / total
    if kind == "linear":
        return lambda_start * (1.0 - frac)
    if kind == "cosine":
        return lambda_start * 0.5 * (1.0 + math.cos(math.pi * frac))
    if kind == "step":
        return lambda_start if frac < 0.5 else 0.0
    raise ValueError(f"unknown lambda decay {kind!r}")


def loss_terms(
    sr_roi: torch.Tensor,
    y: torch.Tensor,
    sr_context: torch.Tensor | None,
    Y: torch.Tensor | None,
    lam: float,
) -> tuple[torch.Tensor, float, float]:
    """Mean-reduced L1 on the ROI plus lam times mean L1 on the full context."""
    if sr_roi.shape != y.shape:
        raise ValueError(f"ROI shapes differ: {tuple(sr_roi.shape)} vs {tuple(y.shape)}")
    l_roi = (sr_roi - y).abs().mean()
    total = l_roi
    l_ctx = 0.0
    if lam > 0 and sr_context is not None:
        if sr_context.shape != Y.shape:
            raise ValueError("context shapes differ")
        ctx = (sr_context - Y).abs().mean()
        total = total + lam * ctx
        l_ctx = float(ctx.detach())
    return total, float(l_roi.detach()), l_ctx


def sample_training_pair(
    pairs: list[SamplePair], cfg: ClsrConfig, rng: np.random.Generator
) -> tuple[np.ndarray, RoiBox, np.ndarray]:
    """Sample an aligned (LR context patch, centered ROI box, HR context patch).

    The LR patch is cut from the pre-degraded LR image at a random offset; the
    HR patch is the scale-aligned crop of the ground truth.
    """
    tc = cfg.train
    cp = tc.context_patch
    for _ in range(len(pairs) * 4):
        pair = pairs[rng.integers(0, len(pairs))]
        _, lh, lw = pair.lr.shape
        if lh < cp or lw < cp:
            continue
        top = int(rng.integers(0, lh - cp + 1))
        left = int(rng.integers(0, lw - cp + 1))
        x_patch = crop(pair.lr, RoiBox(top, left, cp, cp))
        y_patch = crop_hr(pair.hr, RoiBox(top, left, cp, cp), pair.scale)
        margin = (cp - tc.roi_patch) // 2
        return x_patch, RoiBox(margin, margin, tc.roi_patch, tc.roi_patch), y_patch
    raise ValueError(
        f"no image in the dataset admits a {cp}x{cp} LR context patch"
    )


def make_model(cfg: ClsrConfig, seed: int | None = None) -> ClsrModel:
    """Build a model with reproducible initialization."""
    torch.manual_seed(cfg.train.seed if seed is None else seed)
    return ClsrModel(cfg)


def validation_psnr(model: ClsrModel, val_pairs: list[SamplePair], roi: int, pad: int) -> float:
    """Mean PSNR over one centered held-out ROI per validation image."""
    scores = []
    for pair in val_pairs:
        _, lh, lw = pair.lr.shape
        if lh < roi or lw < roi:
            continue
        box = RoiBox((lh - roi) // 2, (lw - roi) // 2, roi, roi)
        sr = model.restore(pair.lr, box, pad=pad)
        scores.append(psnr(sr, crop_hr(pair.hr, box, pair.scale)))
    return float(np.mean(scores)) if scores else float("nan")


def _grad_norms(model: ClsrModel) -> dict[str, float]:
    return {
        name: float(p.grad.norm())
        for name, p in model.named_parameters()
        if p.grad is not None
    }


def train_loop(
    train_pairs: list[SamplePair],
    cfg: ClsrConfig,
    out_dir: str | Path | None = None,
    val_pairs: list[SamplePair] | None = None,
    resume: str | Path | None = None,
    log_every: int = 50,
    progress: bool = False,
) -> tuple[ClsrModel, list[dict]]:
    """Train per the config; returns the model and the metrics log.

    The metrics log is also streamed to out_dir/train_log.jsonl, and weight
    checkpoints land in out_dir every ckpt_every iterations.
    """
    tc = cfg.train
    cfg.validate()
    model = make_model(cfg)
    if resume is not None:
        from .weights import load_weights

        state = {k: torch.from_numpy(v) for k, v in load_weights(resume).items()}
        model.load_state_dict(state)
    # warmup phase: bare backbone on the pre-cropping task
    model.use_gcm = False
    model.use_pim = False

    opt = torch.optim.Adam(model.parameters(), lr=tc.lr, betas=(0.9, 0.999))
    rng = np.random.default_rng(tc.seed)
    out_path = Path(out_dir) if out_dir is not None else None
    log_file = None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        cfg.dump(out_path / "effective_config.json")
        log_file = open(out_path / "train_log.jsonl", "w")

    metrics: list[dict] = []
    s = train_pairs[0].scale
    started = time.time()
    try:
        for it in range(tc.iters):
            if it == tc.pretrain_iters:
                model.use_gcm = tc.use_gcm
                model.use_pim = tc.use_pim
            lr_now = tc.lr * 0.5 * (1.0 + math.cos(math.pi * it / tc.iters))
            for group in opt.param_groups:
                group["lr"] = lr_now

            xs, ys = [], []
            box = None
            for _ in range(tc.batch_size):
                x_patch, box, y_patch = sample_training_pair(train_pairs, cfg, rng)
                xs.append(torch.from_numpy(x_patch))
                ys.append(torch.from_numpy(y_patch))
            X = torch.stack(xs)
            Y = torch.stack(ys)

            lam = 0.0
            if model.use_pim:
                lam = lambda_schedule(it, tc.iters, tc.lambda_start, tc.lambda_decay)
            result = model.forward_roi(
                X, box, pad=tc.pad, want_sr_context=model.use_pim and lam > 0
            )
            y_roi = Y[
                :,
                :,
                box.top * s : (box.top + box.height) * s,
                box.left * s : (box.left + box.width) * s,
            ]
            loss, l_roi, l_ctx = loss_terms(result.sr_roi, y_roi, result.sr_context, Y, lam)

            if not torch.isfinite(loss):
                raise TrainingDiverged(it, _grad_norms(model))

            opt.zero_grad()
            loss.backward()
            opt.step()

            if it % log_every == 0 or it == tc.iters - 1:
                entry = {
                    "iter": it,
                    "loss": float(loss.detach()),
                    "loss_roi": l_roi,
                    "loss_ctx": l_ctx,
                    "lambda": lam,
                    "lr": lr_now,
                }
                if val_pairs and (it % tc.val_every == 0 or it == tc.iters - 1):
                    with torch.no_grad():
                        entry["val_psnr"] = validation_psnr(
                            model, val_pairs, cfg.eval.roi, cfg.eval.pad
                        )
                metrics.append(entry)
                if log_file is not None:
                    log_file.write(json.dumps(entry) + "\n")
                    log_file.flush()
                if progress:
                    rate = (it + 1) / max(time.time() - started, 1e-9)
                    print(f"[train] {json.dumps(entry)} ({rate:.1f} it/s)", flush=True)

            if out_path is not None and tc.ckpt_every and (it + 1) % tc.ckpt_every == 0:
                save_weights(
                    state_dict_to_numpy(model.state_dict()),
                    out_path / f"ckpt_{it + 1:06d}.clsrw",
                )
    finally:
        if log_file is not None:
            log_file.close()

    if out_path is not None:
        save_weights(state_dict_to_numpy(model.state_dict()), out_path / "weights.clsrw")
    return model, metrics
