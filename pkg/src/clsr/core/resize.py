"""Separable image resampling (bicubic and bilinear kernels).

Sampling grid follows the half-pixel-center convention: destination pixel i
reads source coordinate (i + 0.5) * (in / out) - 0.5. When shrinking, the
kernel support is widened by the inverse scale (anti-aliasing), matching
standard SR dataset degradation practice. Arithmetic runs in float64 and the
result is cast back to the input dtype.
"""

from __future__ import annotations

import numpy as np


def cubic_kernel(x: np.ndarray) -> np.ndarray:
    """Keys cubic kernel with a = -0.5 (Catmull-Rom)."""
    x = np.abs(x)
    x2 = x * x
    x3 = x2 * x
    out = np.where(
        x <= 1.0,
        1.5 * x3 - 2.5 * x2 + 1.0,
        np.where(x < 2.0, -0.5 * x3 + 2.5 * x2 - 4.0 * x + 2.0, 0.0),
    )
    return out


def linear_kernel(x: np.ndarray) -> np.ndarray:
    x = np.abs(x)
    return np.where(x < 1.0, 1.0 - x, 0.0)


_KERNELS = {"bicubic": (cubic_kernel, 4.0), "bilinear": (linear_kernel, 2.0)}


def _axis_weights(in_size: int, out_size: int, kernel: str) -> tuple[np.ndarray, np.ndarray]:
    """Per-output-pixel source indices and normalized weights along one axis."""
    kern, support = _KERNELS[kernel]
    scale = out_size / in_size
    # Widen the kernel when shrinking so every source pixel contributes.
    kwidth = support / scale if scale < 1.0 else support

    u = (np.arange(out_size, dtype=np.float64) + 0.5) / scale - 0.5
    left = np.floor(u - kwidth / 2.0).astype(np.int64) + 1
    taps = int(np.ceil(kwidth)) + 2
    idx = left[:, None] + np.arange(taps)[None, :]  # (out, taps)
    dist = u[:, None] - idx
    if scale < 1.0:
        weights = kern(dist * scale)
    else:
        weights = kern(dist)
    weights /= weights.sum(axis=1, keepdims=True)
    idx = np.clip(idx, 0, in_size - 1)  # replicate borders
    return idx, weights


def resize(img: np.ndarray, out_h: int, out_w: int, kernel: str = "bicubic") -> np.ndarray:
    """Resample a (C, H, W) image to (C, out_h, out_w); output clamped to [0, 1]."""
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output size must be positive, got {out_h}x{out_w}")
    if kernel not in _KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}")
    c, in_h, in_w = img.shape
    if (out_h, out_w) == (in_h, in_w):
        return img.copy()

    work = img.astype(np.float64)
    if out_h != in_h:
        idx, wts = _axis_weights(in_h, out_h, kernel)
        # (C, out_h, taps, W) . (out_h, taps) summed over taps
        work = np.einsum("cotw,ot->cow", work[:, idx, :], wts)
    if out_w != in_w:
        idx, wts = _axis_weights(in_w, out_w, kernel)
        work = np.einsum("chot,ot->cho", work[:, :, idx], wts)

    return np.clip(work, 0.0, 1.0).astype(img.dtype)


def bicubic_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Anti-aliased bicubic (a = -0.5) resample, the dataset degradation kernel."""
    return resize(img, out_h, out_w, kernel="bicubic")


def bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    return resize(img, out_h, out_w, kernel="bilinear")


def degrade(hr: np.ndarray, scale: int) -> np.ndarray:
    """Generate the LR context from an HR image by bicubic x`scale` downsampling."""
    c, h, w = hr.shape
    if h % scale or w % scale:
        raise ValueError(f"HR size {h}x{w} is not divisible by scale {scale}")
    return bicubic_resize(hr, h // scale, w // scale)
