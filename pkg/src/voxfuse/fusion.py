"""Per-frame integration: running-average fusion of TSDF, semantics, and features."""

from __future__ import annotations

import numpy as np

from .frames import Frame, sample_coarse_many, sample_pixel_map
from .volume import IntegrationStats, MultiVolume

_Z_EPS = 1e-9


def project_points(frame: Frame, points: np.ndarray):
    """Project world points into the frame.

    Returns (u, v, z): continuous pixel coordinates and camera-space depth.
    Callers decide validity; z <= 0 means behind the camera.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    w2c = frame.world_to_cam()
    cam = pts @ w2c[:3, :3].T + w2c[:3, 3]
    x, y, z = cam[:, 0], cam[:, 1], cam[:, 2]
    fx, fy, cx, cy = frame.intrinsics
    with np.errstate(divide="ignore", invalid="ignore"):
        u = fx * x / z + cx
        v = fy * y / z + cy
    return u, v, z


def view_tsdf(frame: Frame, point, truncation: float) -> float | None:
    """Single-view TSDF estimate at a world point, or None when unobserved.

    None when the projection is behind the camera, lands out of bounds, hits an
    invalid depth pixel, or the point is more than one truncation behind the
    observed surface.
    """
    d, _ = _view_tsdf_many(frame, np.asarray(point, dtype=np.float64).reshape(1, 3), truncation)
    return None if not d.size else float(d[0])


def _view_tsdf_many(frame: Frame, points: np.ndarray, truncation: float):
    """Vectorized view_tsdf. Returns (d values, indices into `points`)."""
    u, v, z = project_points(frame, points)
    h, w = frame.depth.shape
    iu = np.rint(u).astype(np.int64)
    iv = np.rint(v).astype(np.int64)
    ok = (z > _Z_EPS) & (iu >= 0) & (iu < w) & (iv >= 0) & (iv < h)
    idx = np.nonzero(ok)[0]
    depth = frame.depth[iv[idx], iu[idx]]
    dist = depth - z[idx]
    keep = (depth > 0) & (dist >= -truncation)
    idx = idx[keep]
    d = np.clip(dist[keep] / truncation, -1.0, 1.0)
    return d, idx


def integrate_frame(vol: MultiVolume, frame: Frame) -> IntegrationStats:
    """Fuse one frame into the volume with the running-average update rule.

    Geometry updates on every voxel with a valid view TSDF; class probabilities
    and language features update only inside the truncation band (|d| < 1),
    against their own accumulated weight.
    """
    cfg = vol.config
    if frame.semantic_map.shape[2] != cfg.num_classes:
        raise ValueError(
            f"frame has {frame.semantic_map.shape[2]} classes, volume expects {cfg.num_classes}"
        )
    if frame.coarse_feats.feature_dim != cfg.feature_dim:
        raise ValueError(
            f"frame features are {frame.coarse_feats.feature_dim}-d, "
            f"volume expects {cfg.feature_dim}"
        )

    centers = vol.voxel_centers()
    d, idx = _view_tsdf_many(frame, centers, cfg.truncation)
    if not idx.size:
        return IntegrationStats(0, 0)

    w_new = float(frame.view_weight)
    flat_tsdf = vol.tsdf.reshape(-1)
    flat_w = vol.weight.reshape(-1)

    w_old = flat_w[idx]
    flat_tsdf[idx] = (flat_tsdf[idx] * w_old + d * w_new) / (w_old + w_new)

    band = np.abs(d) < 1.0
    bidx = idx[band]
    if bidx.size:
        u, v, _ = project_points(frame, centers[bidx])
        u = np.clip(u, 0, frame.width - 1)
        v = np.clip(v, 0, frame.height - 1)
        sem = sample_pixel_map(frame.semantic_map, u, v)
        feat = sample_coarse_many(frame.coarse_feats, u, v)

        fw_old = vol.feat_weight.reshape(-1)[bidx][:, None]
        flat_probs = vol.class_probs.reshape(-1, cfg.num_classes)
        flat_feat = vol.lang_feat.reshape(-1, cfg.feature_dim)
        flat_probs[bidx] = (
            (flat_probs[bidx].astype(np.float64) * fw_old + sem * w_new) / (fw_old + w_new)
        ).astype(np.float32)
        flat_feat[bidx] = (
            (flat_feat[bidx].astype(np.float64) * fw_old + feat * w_new) / (fw_old + w_new)
        ).astype(np.float32)
        vol.feat_weight.reshape(-1)[bidx] += w_new

    flat_w[idx] += w_new
    return IntegrationStats(voxels_touched=int(idx.size), voxels_in_band=int(bidx.size))
