"""Overlapping patch tiling over a resized frame."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

DEFAULT_RESIZE = (1024, 768)
DEFAULT_PATCH = 256
DEFAULT_STRIDE = 128


@dataclass(frozen=True)
class TilingConfig:
    patch_size: int = DEFAULT_PATCH
    stride: int = DEFAULT_STRIDE
    resize: tuple[int, int] = DEFAULT_RESIZE  # (width, height)

    def __post_init__(self):
        if self.patch_size <= 0 or self.stride <= 0:
            raise ValueError("patch_size and stride must be positive")
        if self.stride > self.patch_size:
            raise ValueError("stride must not exceed patch_size (patches overlap)")
        w, h = self.resize
        if w < self.patch_size or h < self.patch_size:
            raise ValueError("resize target smaller than one patch")

    def grid_shape(self) -> tuple[int, int]:
        """(rows, cols) of the patch lattice."""
        w, h = self.resize
        return (
            (h - self.patch_size) // self.stride + 1,
            (w - self.patch_size) // self.stride + 1,
        )


def load_resized(path, config: TilingConfig) -> np.ndarray:
    """(H, W, 3) uint8 frame at the configured working resolution."""
    img = Image.open(path).convert("RGB")
    return np.asarray(img.resize(config.resize, Image.BILINEAR), dtype=np.uint8)


def iter_patches(frame: np.ndarray, config: TilingConfig):
    """Yield (row, col, patch) over the overlapping patch lattice."""
    h, w = frame.shape[:2]
    if (w, h) != config.resize:
        raise ValueError(f"frame is {w}x{h}, tiling expects {config.resize}")
    rows, cols = config.grid_shape()
    p, s = config.patch_size, config.stride
    for r in range(rows):
        for c in range(cols):
            yield r, c, frame[r * s : r * s + p, c * s : c * s + p]
