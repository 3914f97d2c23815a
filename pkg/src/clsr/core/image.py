"""Image containers and ROI geometry.

Conventions used across the whole package:
- images are float32 numpy arrays, channel-major (C, H, W), values in [0, 1]
- boxes are integer rectangles in LR-image coordinates
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RoiBox:
    """Integer rectangle (top, left, height, width) in LR coordinates."""

    top: int
    left: int
    height: int
    width: int

    def validate(self, img_h: int, img_w: int) -> None:
        if self.height < 1 or self.width < 1:
            raise ValueError(f"box must have positive size, got {self}")
        if self.top < 0 or self.left < 0:
            raise ValueError(f"box origin out of bounds: {self}")
        if self.top + self.height > img_h or self.left + self.width > img_w:
            raise ValueError(
                f"box {self} exceeds image bounds {img_h}x{img_w}"
            )

    def scaled(self, s: int) -> "RoiBox":
        return RoiBox(self.top * s, self.left * s, self.height * s, self.width * s)


@dataclass(frozen=True)
class SamplePair:
    """An LR context image with its HR ground truth at scale `scale`."""

    lr: np.ndarray
    hr: np.ndarray
    scale: int

    def __post_init__(self) -> None:
        _, lh, lw = self.lr.shape
        _, hh, hw = self.hr.shape
        if hh != self.scale * lh or hw != self.scale * lw:
            raise ValueError(
                f"hr size {hh}x{hw} is not {self.scale}x the lr size {lh}x{lw}"
            )


def check_image(img: np.ndarray) -> np.ndarray:
    """Validate the (C, H, W) layout; returns the input unchanged."""
    if img.ndim != 3:
        raise ValueError(f"expected (C, H, W) array, got shape {img.shape}")
    c, h, w = img.shape
    if c < 1 or h < 1 or w < 1:
        raise ValueError(f"degenerate image shape {img.shape}")
    return img


def crop(img: np.ndarray, box: RoiBox) -> np.ndarray:
    """Exact sub-array copy of `box` from a (C, H, W) image."""
    check_image(img)
    box.validate(img.shape[1], img.shape[2])
    return img[:, box.top : box.top + box.height, box.left : box.left + box.width].copy()


def crop_hr(img: np.ndarray, box: RoiBox, s: int) -> np.ndarray:
    """Crop the HR region corresponding to an LR box at scale `s`."""
    return crop(img, box.scaled(s))


def reflect_index(i: np.ndarray | int, n: int) -> np.ndarray | int:
    """Map (possibly out-of-range) indices onto [0, n) by mirror reflection.

    Reflection is about the border pixel itself (no edge duplication):
    [-2, -1, 0, 1] -> [2, 1, 0, 1]. Handles offsets of any magnitude.
    """
    if n == 1:
        return np.zeros_like(np.asarray(i))
    period = 2 * (n - 1)
    m = np.mod(i, period)
    return np.where(m < n, m, period - m)


def crop_with_reflect(img: np.ndarray, top: int, left: int, height: int, width: int) -> np.ndarray:
    """Crop a box that may cross the image border, mirror-reflecting outside pixels.

    Works on any (..., H, W) array; the box is given in absolute coordinates
    and may have negative origin or extend past the borders.
    """
    h, w = img.shape[-2], img.shape[-1]
    rows = reflect_index(np.arange(top, top + height), h)
    cols = reflect_index(np.arange(left, left + width), w)
    return np.ascontiguousarray(img[..., rows[:, None], cols[None, :]])


@dataclass(frozen=True)
class PaddedBox:
    """Footprint of the padded ROI in context coordinates.

    `top`/`left` may be negative (the footprint then crosses the image border
    and is filled by reflection). The original ROI sits at (`inner_top`,
    `inner_left`) inside the padded patch.
    """

    top: int
    left: int
    height: int
    width: int
    inner_top: int
    inner_left: int


def grow_box(box: RoiBox, pad: int, align: int = 1) -> PaddedBox:
    """Grow `box` by `pad` on every side, then extend bottom/right so that the
    patch size is a multiple of `align` (keeps downsampling factors exact)."""
    if pad < 0:
        raise ValueError("pad must be >= 0")
    height = box.height + 2 * pad
    width = box.width + 2 * pad
    height += (-height) % align
    width += (-width) % align
    return PaddedBox(box.top - pad, box.left - pad, height, width, pad, pad)


def pad_from_context(
    X: np.ndarray, box: RoiBox, pad: int, align: int = 1
) -> tuple[np.ndarray, RoiBox]:
    """Crop the ROI grown by `pad`, using real context pixels where available
    and reflection where the grown box crosses the image border.

    Returns the padded patch and the box locating the original ROI inside it.
    """
    check_image(X)
    box.validate(X.shape[1], X.shape[2])
    g = grow_box(box, pad, align)
    patch = crop_with_reflect(X, g.top, g.left, g.height, g.width)
    return patch, RoiBox(g.inner_top, g.inner_left, box.height, box.width)
