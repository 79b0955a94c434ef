"""End-to-end helpers: frame set -> fused volume -> inventory -> mesh."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .frameio import read_classes, read_frame_set
from .fusion import integrate_frame
from .meshing import Mesh, extract_mesh, resample_vertex_features
from .segmentation import Inventory, build_inventory, flood_fill, label_voxels
from .volume import DEFAULT_MEMORY_BUDGET, GridConfig, MultiVolume, new_volume

log = logging.getLogger(__name__)


@dataclass
class FuseResult:
    volume: MultiVolume
    mesh: Mesh
    inventory: Inventory
    frames_used: int


def estimate_bounds(frames_dir, subsample: int = 6) -> tuple[np.ndarray, np.ndarray]:
    """World AABB of all valid backprojected depth samples."""
    lo = np.full(3, np.inf)
    hi = np.full(3, -np.inf)
    for frame in read_frame_set(frames_dir):
        d = frame.depth[::subsample, ::subsample]
        v, u = np.nonzero(d > 0)
        if not v.size:
            continue
        depth = d[v, u]
        fx, fy, cx, cy = frame.intrinsics
        us = u * subsample
        vs = v * subsample
        pts_cam = np.stack(
            [(us - cx) / fx * depth, (vs - cy) / fy * depth, depth], axis=1
        )
        pts = pts_cam @ frame.pose[:3, :3].T + frame.pose[:3, 3]
        lo = np.minimum(lo, pts.min(axis=0))
        hi = np.maximum(hi, pts.max(axis=0))
    if not np.all(np.isfinite(lo)):
        raise ValueError(f"{frames_dir}: no valid depth anywhere; cannot derive bounds")
    return lo, hi


def grid_from_bounds(
    lo, hi, voxel_size: float, num_classes: int, feature_dim: int,
    truncation: float | None = None,
) -> GridConfig:
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    margin = 2 * voxel_size
    dims = np.maximum(np.ceil((hi - lo + 2 * margin) / voxel_size).astype(int), 1)
    return GridConfig(
        origin=tuple(lo - margin),
        voxel_size=voxel_size,
        dims=tuple(int(d) for d in dims),
        num_classes=num_classes,
        feature_dim=feature_dim,
        truncation=truncation,
    )


def fuse_frames(
    frames_dir,
    voxel_size: float = 0.04,
    bounds: tuple | None = None,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
    min_size: int = 5,
    connectivity: int = 6,
    w_min: float = 1.0,
) -> FuseResult:
    """Fuse a frame-set directory and run the full post-processing chain."""
    frames_dir = Path(frames_dir)
    probe = next(iter(read_frame_set(frames_dir)), None)
    if probe is None:
        raise ValueError(f"{frames_dir}: frame set is empty")
    num_classes = probe.semantic_map.shape[2]
    feature_dim = probe.coarse_feats.feature_dim

    if bounds is None:
        lo, hi = estimate_bounds(frames_dir)
    else:
        lo, hi = np.asarray(bounds[0]), np.asarray(bounds[1])
    cfg = grid_from_bounds(lo, hi, voxel_size, num_classes, feature_dim)
    vol = new_volume(cfg, memory_budget=memory_budget)
    log.info("grid %s at %.3f m (%d voxels)", cfg.dims, voxel_size, cfg.num_voxels)

    n = 0
    for frame in read_frame_set(frames_dir):
        stats = integrate_frame(vol, frame)
        n += 1
        log.debug("frame %d: %d voxels touched, %d in band",
                  n, stats.voxels_touched, stats.voxels_in_band)

    class_names = read_classes(frames_dir) or [f"class_{i}" for i in range(num_classes)]
    if len(class_names) != num_classes:
        raise ValueError(
            f"classes.json lists {len(class_names)} names, frames carry {num_classes}"
        )
    inventory = build_inventory(
        flood_fill(label_voxels(vol, w_min=w_min), min_size=min_size, connectivity=connectivity),
        vol,
        class_names,
    )
    mesh = resample_vertex_features(vol, extract_mesh(vol), w_min=w_min)
    return FuseResult(volume=vol, mesh=mesh, inventory=inventory, frames_used=n)


def resegment(
    vol: MultiVolume,
    class_names: list[str],
    min_size: int = 5,
    connectivity: int = 6,
    w_min: float = 1.0,
) -> Inventory:
    """Recompute the inventory from a stored volume with new parameters."""
    return build_inventory(
        flood_fill(label_voxels(vol, w_min=w_min), min_size=min_size, connectivity=connectivity),
        vol,
        class_names,
    )
