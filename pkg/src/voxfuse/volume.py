"""Multi-channel voxel grid: TSDF geometry, class probabilities, language features.

Geometry and weights are float64 (the fusion oracle is checked at rel. 1e-5);
the wide per-voxel channels (class probabilities, language features) are
float32 for memory, with update arithmetic done in float64 per step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetError

DEFAULT_MEMORY_BUDGET = 4 * 1024**3  # bytes
DEFAULT_TRUNCATION_VOXELS = 3.0


@dataclass(frozen=True)
class GridConfig:
    """Geometry of the voxel grid plus channel dimensions."""

    origin: tuple[float, float, float]
    voxel_size: float
    dims: tuple[int, int, int]
    num_classes: int
    feature_dim: int
    truncation: float | None = None  # defaults to 3 * voxel_size

    def __post_init__(self):
        if self.voxel_size <= 0:
            raise ValueError(f"voxel_size must be positive, got {self.voxel_size}")
        if len(self.dims) != 3 or any(int(d) < 1 for d in self.dims):
            raise ValueError(f"dims must be three extents >= 1, got {self.dims}")
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        if self.truncation is None:
            object.__setattr__(self, "truncation", DEFAULT_TRUNCATION_VOXELS * self.voxel_size)
        if self.truncation < self.voxel_size:
            raise ValueError(
                f"truncation {self.truncation} must be >= voxel_size {self.voxel_size}"
            )

    @property
    def num_voxels(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    def storage_bytes(self) -> int:
        """Bytes needed for all channels (tsdf/weight/feat_weight f64, probs/feats f32)."""
        per_voxel = 8 + 8 + 8 + 4 * self.num_classes + 4 * self.feature_dim
        return self.num_voxels * per_voxel

    def voxel_center(self, index) -> np.ndarray:
        return np.asarray(self.origin) + (np.asarray(index, dtype=np.float64) + 0.5) * self.voxel_size

    def voxel_centers(self) -> np.ndarray:
        """(N, 3) world coordinates of every voxel center, C-order over (x, y, z)."""
        nx, ny, nz = self.dims
        ix, iy, iz = np.meshgrid(
            np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij"
        )
        idx = np.stack([ix, iy, iz], axis=-1).reshape(-1, 3)
        return np.asarray(self.origin) + (idx + 0.5) * self.voxel_size


@dataclass
class IntegrationStats:
    """Per-frame integration counters."""

    voxels_touched: int = 0
    voxels_in_band: int = 0


@dataclass
class MultiVolume:
    """Fused voxel grid.

    `weight` accumulates every geometric observation; `feat_weight` accumulates
    only observations inside the truncation band, so the semantic and language
    channels stay exact weighted means of the samples that actually hit them.
    """

    config: GridConfig
    tsdf: np.ndarray
    weight: np.ndarray
    class_probs: np.ndarray
    lang_feat: np.ndarray
    feat_weight: np.ndarray
    _centers: np.ndarray | None = field(default=None, repr=False, compare=False)

    def voxel_centers(self) -> np.ndarray:
        if self._centers is None:
            self._centers = self.config.voxel_centers()
        return self._centers

    def normalized_probs(self) -> np.ndarray:
        """Class distributions renormalized at read time; zero rows stay zero."""
        total = self.class_probs.sum(axis=-1, keepdims=True)
        safe = np.where(total > 0, total, 1.0)
        return self.class_probs / safe

    def copy(self) -> "MultiVolume":
        """Snapshot for concurrent readers between integrations."""
        return MultiVolume(
            config=self.config,
            tsdf=self.tsdf.copy(),
            weight=self.weight.copy(),
            class_probs=self.class_probs.copy(),
            lang_feat=self.lang_feat.copy(),
            feat_weight=self.feat_weight.copy(),
        )


def new_volume(config: GridConfig, memory_budget: int = DEFAULT_MEMORY_BUDGET) -> MultiVolume:
    """Allocate an empty volume: W = 0, tsdf = 1 (free space), features zeroed."""
    needed = config.storage_bytes()
    if needed > memory_budget:
        raise BudgetError(
            f"volume needs {needed / 1e9:.2f} GB, budget is {memory_budget / 1e9:.2f} GB; "
            "reduce dims or increase voxel size"
        )
    dims = config.dims
    return MultiVolume(
        config=config,
        tsdf=np.ones(dims, dtype=np.float64),
        weight=np.zeros(dims, dtype=np.float64),
        class_probs=np.zeros(dims + (config.num_classes,), dtype=np.float32),
        lang_feat=np.zeros(dims + (config.feature_dim,), dtype=np.float32),
        feat_weight=np.zeros(dims, dtype=np.float64),
    )


_VOLUME_MAGIC = b"MVOL"


def save_volume(vol: MultiVolume, path) -> None:
    """Deterministic binary dump: magic, header json, raw channel blocks."""
    import json
    import struct

    cfg = vol.config
    header = json.dumps(
        {
            "schema": 1,
            "origin": list(cfg.origin),
            "voxel_size": cfg.voxel_size,
            "dims": list(cfg.dims),
            "num_classes": cfg.num_classes,
            "feature_dim": cfg.feature_dim,
            "truncation": cfg.truncation,
        },
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_VOLUME_MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        for arr in (vol.tsdf, vol.weight, vol.feat_weight):
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        for arr in (vol.class_probs, vol.lang_feat):
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_volume(path) -> MultiVolume:
    import json
    import struct

    from .errors import FormatError

    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != _VOLUME_MAGIC:
            raise FormatError(f"bad volume magic {magic!r}")
        (hlen,) = struct.unpack("<I", f.read(4))
        meta = json.loads(f.read(hlen).decode("utf-8"))
        cfg = GridConfig(
            origin=tuple(meta["origin"]),
            voxel_size=meta["voxel_size"],
            dims=tuple(meta["dims"]),
            num_classes=meta["num_classes"],
            feature_dim=meta["feature_dim"],
            truncation=meta["truncation"],
        )
        dims = cfg.dims
        n = cfg.num_voxels

        def block(count, dtype):
            raw = f.read(count * np.dtype(dtype).itemsize)
            if len(raw) != count * np.dtype(dtype).itemsize:
                raise FormatError("truncated volume file")
            return np.frombuffer(raw, dtype=dtype).copy()

        tsdf = block(n, "<f8").reshape(dims)
        weight = block(n, "<f8").reshape(dims)
        feat_weight = block(n, "<f8").reshape(dims)
        probs = block(n * cfg.num_classes, "<f4").reshape(dims + (cfg.num_classes,))
        feats = block(n * cfg.feature_dim, "<f4").reshape(dims + (cfg.feature_dim,))
    return MultiVolume(
        config=cfg,
        tsdf=tsdf,
        weight=weight,
        class_probs=probs,
        lang_feat=feats,
        feat_weight=feat_weight,
    )
