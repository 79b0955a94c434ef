"""Writers for the fusion engine's binary interchange formats.

Byte layouts mirror the engine exactly; its reader is the compatibility test.
"""

from __future__ import annotations

import struct

import numpy as np

VLF_MAGIC = b"VLF1"
VLE_MAGIC = b"VLE1"


def write_vlf(path, array: np.ndarray, footer: tuple[int, int, int, int] | None = None) -> None:
    arr = np.asarray(array, dtype="<f4")
    if arr.ndim != 3:
        raise ValueError(f"vlf arrays are rows x cols x dim, got {arr.shape}")
    rows, cols, dim = arr.shape
    with open(path, "wb") as f:
        f.write(VLF_MAGIC)
        f.write(struct.pack("<III", rows, cols, dim))
        f.write(arr.tobytes())
        if footer is not None:
            f.write(struct.pack("<IIII", *footer))


def write_embeddings(path, table: dict[str, np.ndarray]) -> None:
    if not table:
        raise ValueError("embedding table is empty")
    dims = {np.asarray(v).shape[-1] for v in table.values()}
    if len(dims) != 1:
        raise ValueError("embedding vectors must share one dimension")
    dim = dims.pop()
    with open(path, "wb") as f:
        f.write(VLE_MAGIC)
        f.write(struct.pack("<II", len(table), dim))
        for name in sorted(table):
            vec = np.asarray(table[name], dtype=np.float64)
            vec = vec / np.linalg.norm(vec)
            raw = name.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            f.write(vec.astype("<f4").tobytes())
