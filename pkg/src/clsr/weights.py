"""Single-file weight container.

Layout: 8 magic bytes "CLSRW001", a little-endian uint64 with the byte length
of the JSON index, the index itself ({name -> {dtype, shape, byte_offset}},
offsets relative to the blob start), then one contiguous little-endian
float32 blob. Parameter names are hierarchical (backbone.*, gcm.*, pim.*).
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"CLSRW001"


class WeightFormatError(ValueError):
    pass


def save_weights(params: dict[str, np.ndarray], path: str | Path) -> None:
    index: dict[str, dict] = {}
    chunks: list[bytes] = []
    offset = 0
    for name in sorted(params):
        arr = np.ascontiguousarray(params[name], dtype="<f4")
        index[name] = {
            "dtype": "f32",
            "shape": list(arr.shape),
            "byte_offset": offset,
        }
        raw = arr.tobytes()
        chunks.append(raw)
        offset += len(raw)
    index_bytes = json.dumps(index).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(index_bytes)))
        f.write(index_bytes)
        for raw in chunks:
            f.write(raw)


def load_weights(path: str | Path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    if data[: len(MAGIC)] != MAGIC:
        raise WeightFormatError(f"{path} is not a CLSRW001 weight container")
    (index_len,) = struct.unpack_from("<Q", data, len(MAGIC))
    index_start = len(MAGIC) + 8
    index = json.loads(data[index_start : index_start + index_len])
    blob = data[index_start + index_len :]
    params = {}
    for name, meta in index.items():
        if meta["dtype"] != "f32":
            raise WeightFormatError(f"unsupported dtype {meta['dtype']!r} for {name}")
        shape = tuple(meta["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        start = meta["byte_offset"]
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=start)
        params[name] = arr.reshape(shape).copy()
    return params


def weights_hash(path: str | Path) -> str:
    """Stable identity of a weight file (sha256 hex, truncated)."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def state_dict_to_numpy(state_dict) -> dict[str, np.ndarray]:
    return {k: v.detach().cpu().numpy().astype(np.float32) for k, v in state_dict.items()}
