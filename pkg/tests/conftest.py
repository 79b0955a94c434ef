"""Shared rigs: a pixel-aligned observation setup where every voxel projects
exactly onto its own integer pixel, so per-voxel fusion oracles are exact."""

import numpy as np
import pytest

from voxfuse.frames import CoarseFeatureMap, Frame
from voxfuse.volume import GridConfig, MultiVolume, new_volume


class PlaneRig:
    """dims[0] x dims[1] x 1 volume observed head-on by one fixed camera.

    Voxel (i, j, 0) lands on pixel (u, v) = (i + pad, j + pad); its view TSDF
    is (depth[v, u] - z0) / truncation, so tests can dial in any d per voxel.
    """

    def __init__(self, nx=8, ny=6, num_classes=3, feature_dim=4, z0=1.0, voxel=0.05):
        pad = 4
        self.nx, self.ny = nx, ny
        self.width = nx + 2 * pad
        self.height = ny + 2 * pad
        self.pad = pad
        self.z0 = z0
        self.config = GridConfig(
            origin=(-0.5 * voxel, -0.5 * voxel, z0 - 0.5 * voxel),
            voxel_size=voxel,
            dims=(nx, ny, 1),
            num_classes=num_classes,
            feature_dim=feature_dim,
        )
        f = z0 / voxel
        self.intrinsics = (f, f, float(pad), float(pad))
        self.pose = np.eye(4)  # camera at origin looking along +z... see below

    def volume(self) -> MultiVolume:
        return new_volume(self.config)

    def frame(self, d_grid, sem_grid=None, feat_grid=None, weight=1.0) -> Frame:
        """Frame whose view TSDF at voxel (i, j, 0) equals d_grid[i, j].

        Entries of d_grid may exceed [-1, 1]; they clamp like real depth would.
        np.nan means "invalid depth" at that voxel's pixel.
        """
        cfg = self.config
        trunc = cfg.truncation
        depth = np.zeros((self.height, self.width))
        d = np.asarray(d_grid, dtype=np.float64)
        for i in range(self.nx):
            for j in range(self.ny):
                val = d[i, j]
                depth[j + self.pad, i + self.pad] = (
                    0.0 if np.isnan(val) else self.z0 + val * trunc
                )
        C, D = cfg.num_classes, cfg.feature_dim
        sem = np.zeros((self.height, self.width, C), dtype=np.float32)
        sem[..., 0] = 1.0
        if sem_grid is not None:
            sg = np.asarray(sem_grid, dtype=np.float32)
            for i in range(self.nx):
                for j in range(self.ny):
                    sem[j + self.pad, i + self.pad] = sg[i, j]
        grid = np.zeros((self.height, self.width, D), dtype=np.float32)
        grid[..., 0] = 1.0
        if feat_grid is not None:
            fg = np.asarray(feat_grid, dtype=np.float32)
            for i in range(self.nx):
                for j in range(self.ny):
                    grid[j + self.pad, i + self.pad] = fg[i, j]
        coarse = CoarseFeatureMap(
            patch_grid=grid, patch_size=1, stride=1, image_size=(self.width, self.height)
        )
        rgb = np.zeros((self.height, self.width, 3), dtype=np.uint8)
        return Frame(
            rgb=rgb,
            depth=depth,
            intrinsics=self.intrinsics,
            pose=self.pose,
            semantic_map=sem,
            coarse_feats=coarse,
            view_weight=weight,
        )


@pytest.fixture
def rig():
    return PlaneRig()


def unit_rows(rng, n, d):
    v = rng.standard_normal((n, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)
