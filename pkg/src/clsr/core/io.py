"""PNG I/O and dataset manifests.

PNG pixels map to floats as value / 255.0; quantization back to bytes only
happens here, never inside the processing pipeline.
"""

from __future__ import annotations

import io
import json
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError


class ImageDecodeError(ValueError):
    """Raised for missing, corrupt, or non-RGB image inputs."""


def _from_pil(pil: Image.Image) -> np.ndarray:
    if pil.mode != "RGB":
        raise ImageDecodeError(f"expected an RGB image, got mode {pil.mode!r}")
    arr = np.asarray(pil, dtype=np.float32) / 255.0  # (H, W, 3)
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def load_png(path: str | Path) -> np.ndarray:
    """Load an 8-bit RGB PNG as a float32 (3, H, W) array in [0, 1]."""
    try:
        with Image.open(path) as pil:
            return _from_pil(pil)
    except FileNotFoundError:
        raise ImageDecodeError(f"no such image file: {path}") from None
    except UnidentifiedImageError as e:
        raise ImageDecodeError(f"cannot decode {path}: {e}") from None


def decode_png_bytes(data: bytes) -> np.ndarray:
    """Decode in-memory PNG bytes (same contract as load_png)."""
    try:
        with Image.open(io.BytesIO(data)) as pil:
            return _from_pil(pil)
    except UnidentifiedImageError as e:
        raise ImageDecodeError(f"cannot decode image bytes: {e}") from None


def _to_pil(img: np.ndarray) -> Image.Image:
    if img.ndim != 3 or img.shape[0] != 3:
        raise ValueError(f"expected a (3, H, W) image, got shape {img.shape}")
    bytes_hw3 = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    return Image.fromarray(bytes_hw3.transpose(1, 2, 0), mode="RGB")


def save_png(img: np.ndarray, path: str | Path) -> None:
    """Save a float (3, H, W) image in [0, 1] as an 8-bit RGB PNG."""
    _to_pil(img).save(path, format="PNG")


def encode_png_bytes(img: np.ndarray) -> bytes:
    buf = io.BytesIO()
    _to_pil(img).save(buf, format="PNG")
    return buf.getvalue()


def load_manifest(path: str | Path) -> list[dict]:
    """Read a dataset manifest: a JSON list of {hr_path, scale} records.

    Relative hr_path entries are resolved against the manifest's directory.
    """
    path = Path(path)
    records = json.loads(path.read_text())
    if not isinstance(records, list):
        raise ValueError(f"manifest {path} must contain a JSON list")
    out = []
    for rec in records:
        hr_path = Path(rec["hr_path"])
        if not hr_path.is_absolute():
            hr_path = path.parent / hr_path
        out.append({"hr_path": str(hr_path), "scale": int(rec["scale"])})
    return out


def save_manifest(records: list[dict], path: str | Path) -> None:
    Path(path).write_text(json.dumps(records, indent=2))
