"""Posed RGB-D observations and the coarse patch-lattice feature maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def patch_grid_shape(image_size: tuple[int, int], patch_size: int, stride: int) -> tuple[int, int]:
    """(rows, cols) of the overlapping-patch lattice for a (width, height) image."""
    w, h = image_size
    if stride <= 0 or patch_size <= 0:
        raise ValueError("patch_size and stride must be positive")
    if stride > patch_size:
        raise ValueError(f"stride {stride} > patch_size {patch_size}: patches must overlap")
    if w < patch_size or h < patch_size:
        raise ValueError("image smaller than one patch")
    rows = (h - patch_size) // stride + 1
    cols = (w - patch_size) // stride + 1
    return rows, cols


@dataclass
class CoarseFeatureMap:
    """Patch-lattice of feature vectors over an image, bilinear between centers."""

    patch_grid: np.ndarray  # (R, S, D)
    patch_size: int
    stride: int
    image_size: tuple[int, int]  # (width, height)

    @property
    def feature_dim(self) -> int:
        return self.patch_grid.shape[2]

    def patch_center(self, row: int, col: int) -> tuple[float, float]:
        half = (self.patch_size - 1) / 2.0
        return (half + col * self.stride, half + row * self.stride)


def build_coarse_map(
    patch_features: np.ndarray,
    patch_size: int,
    stride: int,
    image_size: tuple[int, int],
) -> CoarseFeatureMap:
    """Validate the lattice layout and store unit-normalized patch vectors."""
    patch_features = np.asarray(patch_features, dtype=np.float32)
    if patch_features.ndim != 3:
        raise ValueError(f"patch grid must be R x S x D, got shape {patch_features.shape}")
    rows, cols = patch_grid_shape(tuple(image_size), patch_size, stride)
    if patch_features.shape[:2] != (rows, cols):
        raise ValueError(
            f"patch grid shape {patch_features.shape[:2]} inconsistent with "
            f"expected ({rows}, {cols}) for image {image_size}, "
            f"patch {patch_size}, stride {stride}"
        )
    norms = np.linalg.norm(patch_features, axis=-1)
    if np.any(norms < 1e-8):
        raise ValueError("patch features must be nonzero to be unit-normalized")
    grid = patch_features / norms[..., None]
    return CoarseFeatureMap(
        patch_grid=grid.astype(np.float32),
        patch_size=int(patch_size),
        stride=int(stride),
        image_size=(int(image_size[0]), int(image_size[1])),
    )


def sample_coarse(cmap: CoarseFeatureMap, pixel) -> np.ndarray:
    """Bilinear feature at a pixel; outside the outer centers clamps to the border."""
    pix = np.asarray(pixel, dtype=np.float64)
    single = pix.ndim == 1
    pts = pix.reshape(-1, 2)
    out = sample_coarse_many(cmap, pts[:, 0], pts[:, 1])
    return out[0] if single else out


def sample_coarse_many(cmap: CoarseFeatureMap, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    rows, cols, _ = cmap.patch_grid.shape
    half = (cmap.patch_size - 1) / 2.0
    gx = np.clip((np.asarray(u, dtype=np.float64) - half) / cmap.stride, 0.0, cols - 1.0)
    gy = np.clip((np.asarray(v, dtype=np.float64) - half) / cmap.stride, 0.0, rows - 1.0)
    return _bilinear_lattice(cmap.patch_grid, gy, gx)


def _bilinear_lattice(grid: np.ndarray, gy: np.ndarray, gx: np.ndarray) -> np.ndarray:
    """Bilinear interpolation on a (R, S, D) lattice at fractional (gy, gx)."""
    rows, cols = grid.shape[:2]
    y0 = np.clip(np.floor(gy).astype(np.int64), 0, rows - 1)
    x0 = np.clip(np.floor(gx).astype(np.int64), 0, cols - 1)
    y1 = np.minimum(y0 + 1, rows - 1)
    x1 = np.minimum(x0 + 1, cols - 1)
    fy = (gy - y0)[..., None]
    fx = (gx - x0)[..., None]
    g = grid.astype(np.float64)
    top = g[y0, x0] * (1 - fx) + g[y0, x1] * fx
    bot = g[y1, x0] * (1 - fx) + g[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def sample_pixel_map(img: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Bilinear sample of an (H, W, C) per-pixel map at continuous pixel coords."""
    return _bilinear_lattice(img, np.asarray(v, dtype=np.float64), np.asarray(u, dtype=np.float64))


@dataclass
class Frame:
    """One posed RGB-D observation with aligned semantic and feature maps."""

    rgb: np.ndarray  # (H, W, 3) uint8
    depth: np.ndarray  # (H, W) float meters, 0 = invalid
    intrinsics: tuple[float, float, float, float]  # fx, fy, cx, cy
    pose: np.ndarray  # 4x4 camera-to-world, row-major
    semantic_map: np.ndarray  # (H, W, C)
    coarse_feats: CoarseFeatureMap
    view_weight: float = 1.0

    def __post_init__(self):
        self.depth = np.asarray(self.depth, dtype=np.float64)
        self.pose = np.asarray(self.pose, dtype=np.float64)
        h, w = self.depth.shape
        if self.rgb.shape[:2] != (h, w):
            raise ValueError("rgb and depth dimensions differ")
        if self.semantic_map.shape[:2] != (h, w):
            raise ValueError("semantic_map and depth dimensions differ")
        if self.coarse_feats.image_size != (w, h):
            raise ValueError("coarse feature map image_size does not match frame")
        if self.view_weight <= 0:
            raise ValueError("view_weight must be positive")
        if np.any(self.depth < 0):
            raise ValueError("depth values must be >= 0")
        if self.pose.shape != (4, 4):
            raise ValueError("pose must be 4x4")
        rot = self.pose[:3, :3]
        if not np.allclose(rot @ rot.T, np.eye(3), atol=1e-5):
            raise ValueError("pose rotation block is not orthonormal within 1e-5")
        # Rows carrying probability mass must be proper distributions; all-zero
        # rows mark pixels with no semantic observation.
        sums = self.semantic_map.sum(axis=-1)
        massy = sums > 0.1
        if np.any(np.abs(sums[massy] - 1.0) > 1e-4):
            raise ValueError("semantic_map rows must sum to 1 +- 1e-4 where populated")

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    def world_to_cam(self) -> np.ndarray:
        rot = self.pose[:3, :3]
        t = self.pose[:3, 3]
        inv = np.eye(4)
        inv[:3, :3] = rot.T
        inv[:3, 3] = -rot.T @ t
        return inv
