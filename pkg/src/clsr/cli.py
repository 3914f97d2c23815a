"""Command-line entry point wiring data prep, training, evaluation, sweeps,
inference, and the HTTP service."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np
import torch

from .config import ClsrConfig, apply_overrides, load_config
from .core.image import RoiBox
from .core.io import load_png, save_png
from .data import generate_corpus, load_dataset
from .evalharness import (
    config_hash,
    evaluate,
    run_ablation,
    sweep_context_size,
    sweep_input_size,
    sweep_padding,
)
from .flops import context_flops, flops_estimate
from .model import ClsrModel, attention_heatmap, to_image, to_tensor
from .train import train_loop
from .weights import load_weights, save_weights, state_dict_to_numpy, weights_hash


def _load_model(cfg: ClsrConfig, weights: str | None, seed: int) -> ClsrModel:
    torch.manual_seed(seed)
    model = ClsrModel(cfg)
    if weights:
        state = {k: torch.from_numpy(v) for k, v in load_weights(weights).items()}
        model.load_state_dict(state)
    model.eval()
    return model


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump_config(cfg: ClsrConfig, out: Path) -> None:
    cfg.dump(out / "effective_config.json")


def _resolve_config(args, **overrides) -> ClsrConfig:
    cfg = load_config(getattr(args, "config", None))
    merged = {k: v for k, v in overrides.items()}
    return apply_overrides(cfg, merged)


def cmd_prepare_data(args) -> int:
    out = _out_dir(args)
    counts = {"train": args.train_count, "val": args.val_count, "test": args.test_count}
    manifests = generate_corpus(out, counts, hr_size=args.hr_size, scale=args.scale, seed=args.seed)
    print(json.dumps({k: str(v) for k, v in manifests.items()}, indent=2))
    return 0


def cmd_train(args) -> int:
    cfg = _resolve_config(
        args,
        **{
            "train.seed": args.seed,
            "train.iters": args.iters,
            "train.batch_size": args.batch_size,
        },
    )
    if args.iters is not None and cfg.train.pretrain_iters >= cfg.train.iters:
        cfg.train.pretrain_iters = cfg.train.iters // 2
        print(f"note: clamped pretrain_iters to {cfg.train.pretrain_iters}")
    out = _out_dir(args)
    _dump_config(cfg, out)
    train_pairs = load_dataset(args.data)
    val_pairs = load_dataset(args.val_data) if args.val_data else None
    train_loop(train_pairs, cfg, out_dir=out, val_pairs=val_pairs, resume=args.resume,
               progress=True)
    print(f"weights written to {out / 'weights.clsrw'}")
    return 0


def cmd_eval(args) -> int:
    cfg = _resolve_config(args, **{"eval.roi": args.roi, "eval.pad": args.pad})
    model = _load_model(cfg, args.weights, args.seed)
    pairs = load_dataset(args.data)
    methods = tuple(args.methods.split(","))
    report = evaluate(model, pairs, methods=methods, roi_size=cfg.eval.roi, pad=cfg.eval.pad,
                      dataset_name=Path(args.data).stem)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    report.save(out)
    cfg.dump(out.with_suffix(".config.json"))
    print(report.to_csv())
    return 0


def cmd_sweep(args) -> int:
    cfg = _resolve_config(args)
    model = _load_model(cfg, args.weights, args.seed)
    pairs = load_dataset(args.data)
    values = tuple(int(v) for v in args.values.split(",")) if args.values else None
    if args.kind == "input-size":
        report = sweep_input_size(model, pairs, sizes=values or (96, 48, 24))
    elif args.kind == "context-size":
        report = sweep_context_size(model, pairs, ratios=values or (1, 2, 4, 6, 8),
                                    roi_size=cfg.eval.roi, pad=cfg.eval.pad)
    elif args.kind == "padding":
        report = sweep_padding(model, pairs, pads=values or (0, 2, 4, 8, 12),
                               roi_size=cfg.eval.roi)
    else:
        print(f"unknown sweep kind {args.kind!r}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    report.save(out)
    cfg.dump(out.with_suffix(".config.json"))
    print(report.to_csv())
    return 0


def cmd_ablate(args) -> int:
    cfg = _resolve_config(args, **{"train.seed": args.seed, "train.iters": args.iters})
    out = _out_dir(args)
    _dump_config(cfg, out)
    train_pairs = load_dataset(args.data)
    eval_pairs = load_dataset(args.eval_data) if args.eval_data else train_pairs
    report = run_ablation(train_pairs, eval_pairs, cfg, out_dir=out)
    report.save(out / "ablation.csv")
    report.save(out / "ablation.json")
    print(report.to_csv())
    return 0


def cmd_infer(args) -> int:
    cfg = _resolve_config(args)
    model = _load_model(cfg, args.weights, args.seed)
    X = load_png(args.image)
    top, left, height, width = (int(v) for v in args.box.split(","))
    box = RoiBox(top, left, height, width)
    out = _out_dir(args)
    _dump_config(cfg, out)

    started = time.perf_counter()
    with torch.no_grad():
        result = model.forward_roi(to_tensor(X), box, pad=args.pad,
                                   want_attention=args.attention)
    elapsed_ms = (time.perf_counter() - started) * 1e3
    sr = to_image(result.sr_roi)
    save_png(sr, out / "sr.png")

    _, h, w = X.shape
    est = flops_estimate(cfg, (box.height, box.width), (h, w), pad=cfg.eval.pad if args.pad is None else args.pad,
                         use_gcm=model.use_gcm, use_pim=model.use_pim)
    diagnostics = {
        "image": str(args.image),
        "box": [box.top, box.left, box.height, box.width],
        "pad": cfg.eval.pad if args.pad is None else args.pad,
        "scale": cfg.backbone.scale,
        "output_size": [sr.shape[1], sr.shape[2]],
        "flops": est.to_dict(),
        "elapsed_ms": elapsed_ms,
        "config_hash": config_hash(cfg),
        "weights": str(args.weights) if args.weights else None,
    }
    if args.attention and result.attention is not None:
        bank = model.prepare_context(to_tensor(X)).bank
        nq = result.attention.shape[2]
        heat = attention_heatmap(result.attention, bank, cfg.gcm.factor, nq // 2)
        np.save(out / "attention.npy", heat)
        diagnostics["attention_map"] = "attention.npy"
    (out / "diagnostics.json").write_text(json.dumps(diagnostics, indent=2))
    print(json.dumps(diagnostics, indent=2))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import load_service

    weights = args.weights or os.environ.get("CLSR_WEIGHTS")
    cfg = _resolve_config(args)
    if args.max_sessions is None and "CLSR_MAX_SESSIONS" in os.environ:
        cfg.service.max_sessions = int(os.environ["CLSR_MAX_SESSIONS"])
    elif args.max_sessions is not None:
        cfg.service.max_sessions = args.max_sessions
    port = args.port or int(os.environ.get("CLSR_PORT", "8700"))

    if weights:
        app = load_service(weights, cfg)
    else:
        # fresh random weights; useful for wiring tests only
        from .service import create_app

        app = create_app(_load_model(cfg, None, args.seed), cfg=cfg)
    uvicorn.run(app, host=args.host, port=port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clsr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=0)
        if out_required:
            p.add_argument("--out", required=True, help="output directory or file")

    p = sub.add_parser("prepare-data", help="generate the synthetic structured corpus")
    common(p)
    p.add_argument("--train-count", type=int, default=20)
    p.add_argument("--val-count", type=int, default=4)
    p.add_argument("--test-count", type=int, default=6)
    p.add_argument("--hr-size", type=int, default=768)
    p.add_argument("--scale", type=int, default=4)
    p.set_defaults(func=cmd_prepare_data)

    p = sub.add_parser("train", help="train a model")
    common(p)
    p.add_argument("--data", required=True, help="training manifest")
    p.add_argument("--val-data", default=None)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--resume", default=None, help="weight container to resume from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="tiled patch-wise evaluation")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--weights", default=None)
    p.add_argument("--methods", default="pre,post,clsr")
    p.add_argument("--roi", type=int, default=None)
    p.add_argument("--pad", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="trend sweeps")
    common(p)
    p.add_argument("kind", choices=["input-size", "context-size", "padding"])
    p.add_argument("--data", required=True)
    p.add_argument("--weights", default=None)
    p.add_argument("--values", default=None, help="comma-separated sweep values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ablate", help="train + evaluate the 2x2 module grid")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--eval-data", default=None)
    p.add_argument("--iters", type=int, default=None)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("infer", help="restore one ROI of one image")
    common(p)
    p.add_argument("--image", required=True)
    p.add_argument("--box", required=True, help="top,left,height,width in LR pixels")
    p.add_argument("--weights", default=None)
    p.add_argument("--pad", type=int, default=None)
    p.add_argument("--attention", action="store_true", help="export the attention heatmap")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("serve", help="run the session inference service")
    common(p, out_required=False)
    p.add_argument("--weights", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--max-sessions", type=int, default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
