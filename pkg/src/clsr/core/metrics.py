"""Reference-quality PSNR and SSIM.

Both metrics are computed on whole patches with no border exclusion. SSIM
runs on luma (BT.601 weights) with the standard 11x11 Gaussian window,
sigma 1.5, K1 = 0.01, K2 = 0.03, averaged over valid window positions only.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.signal import convolve2d

BT601_WEIGHTS = np.array([0.299, 0.587, 0.114], dtype=np.float64)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _check_shapes(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """10*log10(peak^2 / MSE) over all pixels and channels.

    Identical inputs return math.inf (documented sentinel, not an error).
    """
    _check_shapes(a, b)
    diff = a.astype(np.float64) - b.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def luma(img: np.ndarray) -> np.ndarray:
    """Collapse channels to a single (H, W) plane for SSIM."""
    if img.shape[0] == 3:
        return np.tensordot(BT601_WEIGHTS, img.astype(np.float64), axes=1)
    if img.shape[0] == 1:
        return img[0].astype(np.float64)
    return img.astype(np.float64).mean(axis=0)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(ax * ax) / (2.0 * sigma * sigma))
    win = np.outer(g, g)
    return win / win.sum()


def ssim(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> float:
    """Mean structural similarity between two images, in [-1, 1]."""
    _check_shapes(a, b)
    x = luma(a)
    y = luma(b)
    h, w = x.shape
    if min(h, w) < SSIM_WINDOW:
        raise ValueError(
            f"patch {h}x{w} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )

    win = gaussian_window()
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2

    mu_x = convolve2d(x, win, mode="valid")
    mu_y = convolve2d(y, win, mode="valid")
    xx = convolve2d(x * x, win, mode="valid")
    yy = convolve2d(y * y, win, mode="valid")
    xy = convolve2d(x * y, win, mode="valid")

    var_x = xx - mu_x * mu_x
    var_y = yy - mu_y * mu_y
    cov = xy - mu_x * mu_y

    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))
