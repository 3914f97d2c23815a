"""Synthetic structured test images and dataset loading.

The generator produces HR images full of sharp repeated structure (square
gratings, checkerboards, jittered glyph grids, thin line bundles). Repetition
with sub-pixel jitter is what makes the surrounding context genuinely
informative after downsampling, so trend experiments run on these without
any external dataset.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .core.image import SamplePair
from .core.io import load_manifest, load_png, save_manifest, save_png
from .core.resize import degrade


def _rand_color(rng: np.random.Generator, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    return rng.uniform(lo, hi, size=(3, 1, 1)).astype(np.float32)


def _grating(size: int, rng: np.random.Generator) -> np.ndarray:
    """Hard-edged stripe grating at a random angle, frequency, and phase.

    Periods stay above the x4 Nyquist limit so the HR structure is
    recoverable in principle, just heavily blurred/phase-ambiguous in LR.
    """
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    theta = rng.uniform(0, np.pi)
    period = rng.uniform(10.0, 44.0)
    phase = rng.uniform(0, 2 * np.pi)
    wave = np.sin(2 * np.pi * (xx * np.cos(theta) + yy * np.sin(theta)) / period + phase)
    mask = (wave > rng.uniform(-0.3, 0.3)).astype(np.float32)
    a, b = _rand_color(rng, 0.0, 0.45), _rand_color(rng, 0.55, 1.0)
    return a + (b - a) * mask[None, :, :]


def _checkerboard(size: int, rng: np.random.Generator) -> np.ndarray:
    cell = int(rng.integers(8, 28))
    yy, xx = np.mgrid[0:size, 0:size]
    mask = (((yy // cell) + (xx // cell)) % 2).astype(np.float32)
    a, b = _rand_color(rng, 0.0, 0.4), _rand_color(rng, 0.6, 1.0)
    return a + (b - a) * mask[None, :, :]


def _glyph(k: int, rng: np.random.Generator) -> np.ndarray:
    """A small text-like binary motif built from a few thick strokes."""
    g = np.zeros((k, k), dtype=np.float32)
    t = max(3, k // 5)  # strokes wide enough to survive x4 degradation
    kind = rng.integers(0, 5)
    mid = k // 2
    if kind == 0:  # cross
        g[mid - t // 2 : mid + (t + 1) // 2, :] = 1
        g[:, mid - t // 2 : mid + (t + 1) // 2] = 1
    elif kind == 1:  # L
        g[-t:, :] = 1
        g[:, :t] = 1
    elif kind == 2:  # T
        g[:t, :] = 1
        g[:, mid - t // 2 : mid + (t + 1) // 2] = 1
    elif kind == 3:  # box outline
        g[:t, :] = g[-t:, :] = 1
        g[:, :t] = g[:, -t:] = 1
    else:  # double bar
        g[:, : t + 1] = 1
        g[:, -(t + 1) :] = 1
    return g


def _glyph_field(size: int, rng: np.random.Generator) -> np.ndarray:
    """The same glyph stamped on a jittered grid: self-similar, phase-diverse."""
    k = int(rng.integers(14, 34))
    glyph = _glyph(k, rng)
    period = int(k * rng.uniform(1.4, 2.4))
    jitter = max(1, period // 5)
    paper, ink = _rand_color(rng, 0.6, 1.0), _rand_color(rng, 0.0, 0.35)
    img = np.broadcast_to(paper, (3, size, size)).copy()
    for gy in range(0, size - k, period):
        for gx in range(0, size - k, period):
            y = int(np.clip(gy + rng.integers(-jitter, jitter + 1), 0, size - k))
            x = int(np.clip(gx + rng.integers(-jitter, jitter + 1), 0, size - k))
            cell = img[:, y : y + k, x : x + k]
            img[:, y : y + k, x : x + k] = cell + (ink - cell) * glyph[None, :, :]
    return img


def _line_bundle(size: int, rng: np.random.Generator) -> np.ndarray:
    """Thin parallel lines with slowly varying spacing (line-art texture)."""
    img = np.broadcast_to(_rand_color(rng, 0.7, 1.0), (3, size, size)).copy()
    ink = _rand_color(rng, 0.0, 0.3)
    horizontal = rng.random() < 0.5
    pos = int(rng.integers(2, 10))
    spacing = rng.uniform(9.0, 26.0)
    drift = rng.uniform(-0.08, 0.08)
    width = int(rng.integers(2, 6))
    while pos < size - width:
        sl = (slice(None), slice(pos, pos + width), slice(None)) if horizontal else (
            slice(None), slice(None), slice(pos, pos + width))
        img[sl] = ink
        spacing = max(3.0, spacing + drift * spacing)
        pos += int(round(spacing))
    return img


_LAYERS = (_grating, _checkerboard, _glyph_field, _line_bundle)


def generate_structured_image(size: int, rng: np.random.Generator) -> np.ndarray:
    """Compose 2 horizontal/vertical bands of random structured layers."""
    img = np.empty((3, size, size), dtype=np.float32)
    split_axis = int(rng.integers(1, 3))  # 1 = horizontal bands, 2 = vertical
    cut = int(rng.integers(size // 3, 2 * size // 3))
    for part in range(2):
        layer = _LAYERS[rng.integers(0, len(_LAYERS))](size, rng).astype(np.float32)
        if split_axis == 1:
            region = (slice(None), slice(0, cut) if part == 0 else slice(cut, size), slice(None))
        else:
            region = (slice(None), slice(None), slice(0, cut) if part == 0 else slice(cut, size))
        img[region] = layer[region]
    return np.clip(img, 0.0, 1.0)


def generate_corpus(
    out_dir: str | Path,
    counts: dict[str, int],
    hr_size: int = 768,
    scale: int = 4,
    seed: int = 0,
) -> dict[str, Path]:
    """Write per-split PNG corpora and manifests; returns split -> manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    manifests = {}
    for split, count in counts.items():
        records = []
        for i in range(count):
            img = generate_structured_image(hr_size, rng)
            name = f"{split}_{i:03d}.png"
            save_png(img, out_dir / name)
            records.append({"hr_path": name, "scale": scale})
        manifest_path = out_dir / f"{split}.json"
        save_manifest(records, manifest_path)
        manifests[split] = manifest_path
    return manifests


def load_dataset(manifest_path: str | Path) -> list[SamplePair]:
    """Load HR images from a manifest and derive their LR contexts."""
    pairs = []
    for rec in load_manifest(manifest_path):
        hr = load_png(rec["hr_path"])
        scale = rec["scale"]
        c, h, w = hr.shape
        hr = hr[:, : h - h % scale, : w - w % scale]
        pairs.append(SamplePair(lr=degrade(hr, scale), hr=hr, scale=scale))
    return pairs
