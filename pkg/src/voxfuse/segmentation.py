"""Voxel labeling, 3D flood fill into object segments, and the object inventory."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError
from .frameio import read_vlf, write_vlf
from .volume import GridConfig, MultiVolume

UNLABELED = -1

_FACE_OFFSETS = np.array(
    [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=np.int64
)
_DIAG_OFFSETS = np.array(
    [
        [dx, dy, dz]
        for dx in (-1, 0, 1)
        for dy in (-1, 0, 1)
        for dz in (-1, 0, 1)
        if (dx, dy, dz) != (0, 0, 0)
    ],
    dtype=np.int64,
)


@dataclass
class LabelVolume:
    """Per-voxel class ids; UNLABELED where semantics are untrusted."""

    dims: tuple[int, int, int]
    labels: np.ndarray  # (X, Y, Z) int32

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int32)
        if self.labels.shape != tuple(self.dims):
            raise ValueError("labels shape does not match dims")


def label_voxels(vol: MultiVolume, w_min: float = 1.0) -> LabelVolume:
    """Argmax class per voxel, gated on accumulated semantic weight.

    Ties break to the lowest class index. The gate uses the in-band feature
    weight, not the geometric weight: free-space voxels carry no semantics.
    """
    probs = vol.class_probs
    mass = probs.sum(axis=-1)
    trusted = (vol.feat_weight >= w_min) & (mass > 0)
    labels = np.where(trusted, probs.argmax(axis=-1), UNLABELED).astype(np.int32)
    return LabelVolume(dims=vol.config.dims, labels=labels)


@dataclass
class RawSegment:
    class_id: int
    voxels: np.ndarray  # (N, 3) int64
    seed: tuple[int, int, int]  # lexicographically smallest member


def flood_fill(
    label_vol: LabelVolume, min_size: int = 5, connectivity: int = 6
) -> list[RawSegment]:
    """Connected components of equal-label voxels.

    Iterative frontier expansion with an explicit work queue; 6-connectivity
    by default, 26 behind the flag. Output is ordered by (class_id, size desc,
    seed voxel) and is deterministic.
    """
    if connectivity == 6:
        offsets = _FACE_OFFSETS
    elif connectivity == 26:
        offsets = _DIAG_OFFSETS
    else:
        raise ValueError("connectivity must be 6 or 26")

    labels = label_vol.labels
    dims = np.asarray(labels.shape, dtype=np.int64)
    flat_labels = labels.reshape(-1)
    strides = np.array(
        [dims[1] * dims[2], dims[2], 1], dtype=np.int64
    )
    flat_offsets = offsets @ strides

    visited = np.zeros(flat_labels.shape, dtype=bool)
    labeled_flat = np.nonzero(flat_labels.reshape(-1) != UNLABELED)[0]

    segments: list[RawSegment] = []
    for seed_flat in labeled_flat:
        if visited[seed_flat]:
            continue
        cls = int(flat_labels[seed_flat])
        visited[seed_flat] = True
        members = [np.array([seed_flat], dtype=np.int64)]
        frontier = np.array([seed_flat], dtype=np.int64)
        while frontier.size:
            coords = np.stack(np.unravel_index(frontier, labels.shape), axis=1)
            cand_coords = coords[:, None, :] + offsets[None, :, :]
            inside = np.all((cand_coords >= 0) & (cand_coords < dims), axis=2)
            cand_flat = frontier[:, None] + flat_offsets[None, :]
            cand_flat = np.unique(cand_flat[inside])
            cand_flat = cand_flat[
                (flat_labels[cand_flat] == cls) & ~visited[cand_flat]
            ]
            visited[cand_flat] = True
            if cand_flat.size:
                members.append(cand_flat)
            frontier = cand_flat
        flat = np.concatenate(members)
        if flat.size < min_size:
            continue
        flat.sort()
        voxels = np.stack(np.unravel_index(flat, labels.shape), axis=1)
        segments.append(
            RawSegment(class_id=cls, voxels=voxels, seed=tuple(int(x) for x in voxels[0]))
        )

    segments.sort(key=lambda s: (s.class_id, -len(s.voxels), s.seed))
    return segments


@dataclass
class ObjectSegment:
    """One flood-filled object with its per-voxel language features."""

    segment_id: int
    class_id: int
    voxels: np.ndarray  # (N, 3) int64
    centroid: np.ndarray  # (3,) float64, meters
    voxel_feats: np.ndarray  # (N, D) float32, unit rows
    auto_name: str
    user_name: str | None = None
    remembered: bool = False
    insitu_class: int | None = None

    @property
    def label(self) -> str:
        """Display label: the user's name when given, else the generated one."""
        return self.user_name if self.user_name else self.auto_name

    @property
    def voxel_count(self) -> int:
        return len(self.voxels)


@dataclass
class Inventory:
    segments: list[ObjectSegment]
    class_names: list[str]
    grid: GridConfig

    def get(self, segment_id: int) -> ObjectSegment:
        for seg in self.segments:
            if seg.segment_id == segment_id:
                return seg
        raise KeyError(f"no segment with id {segment_id}")

    def personalized(self) -> list[ObjectSegment]:
        return [s for s in self.segments if s.remembered]

    def next_segment_id(self) -> int:
        return max((s.segment_id for s in self.segments), default=0) + 1


def build_inventory(
    segments: list[RawSegment], vol: MultiVolume, class_names: list[str]
) -> Inventory:
    """Assemble segments with centroids, normalized per-voxel features, auto names."""
    if len(class_names) != vol.config.num_classes:
        raise ValueError("class_names length must equal the volume's class count")
    dims = vol.config.dims
    out: list[ObjectSegment] = []
    per_class_counter: dict[int, int] = {}
    origin = np.asarray(vol.config.origin)
    h = vol.config.voxel_size
    for i, raw in enumerate(segments, start=1):
        vox = np.asarray(raw.voxels, dtype=np.int64)
        if vox.size and (np.any(vox < 0) or np.any(vox >= np.asarray(dims))):
            raise ValueError(f"segment {i} references out-of-grid voxels")
        feats = vol.lang_feat[vox[:, 0], vox[:, 1], vox[:, 2]].astype(np.float64)
        norms = np.linalg.norm(feats, axis=1, keepdims=True)
        feats = np.where(norms > 1e-12, feats / np.where(norms > 0, norms, 1.0), 0.0)
        k = per_class_counter.get(raw.class_id, 0) + 1
        per_class_counter[raw.class_id] = k
        centroid = origin + (vox.mean(axis=0) + 0.5) * h
        out.append(
            ObjectSegment(
                segment_id=i,
                class_id=raw.class_id,
                voxels=vox,
                centroid=centroid,
                voxel_feats=feats.astype(np.float32),
                auto_name=f"{class_names[raw.class_id]}:{k}",
            )
        )
    return Inventory(segments=out, class_names=list(class_names), grid=vol.config)


INVENTORY_SCHEMA = 1


def save_inventory(inv: Inventory, directory) -> None:
    """inventory.json plus one .vlf feature sidecar per segment.

    The JSON lands via rename so readers see either the old or the new
    inventory; sidecars for retired segments are removed afterwards.
    """
    import os

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    seg_dir = directory / "segments"
    seg_dir.mkdir(exist_ok=True)
    cfg = inv.grid
    doc = {
        "schema": INVENTORY_SCHEMA,
        "class_names": inv.class_names,
        "grid": {
            "origin": list(cfg.origin),
            "voxel_size": cfg.voxel_size,
            "dims": list(cfg.dims),
            "num_classes": cfg.num_classes,
            "feature_dim": cfg.feature_dim,
            "truncation": cfg.truncation,
        },
        "segments": [
            {
                "segment_id": s.segment_id,
                "class_id": s.class_id,
                "auto_name": s.auto_name,
                "user_name": s.user_name,
                "remembered": s.remembered,
                "insitu_class": s.insitu_class,
                "centroid": [float(x) for x in s.centroid],
                "voxel_count": s.voxel_count,
                "voxels": s.voxels.tolist(),
            }
            for s in inv.segments
        ],
    }
    for s in inv.segments:
        write_vlf(seg_dir / f"seg_{s.segment_id}.feat.vlf", s.voxel_feats[:, None, :])
    tmp = directory / "inventory.json.tmp"
    tmp.write_text(json.dumps(doc, sort_keys=True, indent=1))
    os.replace(tmp, directory / "inventory.json")
    keep = {f"seg_{s.segment_id}.feat.vlf" for s in inv.segments}
    for stale in seg_dir.glob("seg_*.feat.vlf"):
        if stale.name not in keep:
            stale.unlink()


def load_inventory(directory) -> Inventory:
    directory = Path(directory)
    path = directory / "inventory.json"
    if not path.exists():
        raise FormatError(f"{directory}: missing inventory.json")
    doc = json.loads(path.read_text())
    if doc.get("schema") != INVENTORY_SCHEMA:
        raise FormatError(f"unsupported inventory schema {doc.get('schema')}")
    g = doc["grid"]
    cfg = GridConfig(
        origin=tuple(g["origin"]),
        voxel_size=g["voxel_size"],
        dims=tuple(g["dims"]),
        num_classes=g["num_classes"],
        feature_dim=g["feature_dim"],
        truncation=g["truncation"],
    )
    segments = []
    for sd in doc["segments"]:
        feats, _ = read_vlf(directory / "segments" / f"seg_{sd['segment_id']}.feat.vlf")
        segments.append(
            ObjectSegment(
                segment_id=sd["segment_id"],
                class_id=sd["class_id"],
                voxels=np.asarray(sd["voxels"], dtype=np.int64).reshape(-1, 3),
                centroid=np.asarray(sd["centroid"], dtype=np.float64),
                voxel_feats=feats[:, 0, :],
                auto_name=sd["auto_name"],
                user_name=sd["user_name"],
                remembered=sd["remembered"],
                insitu_class=sd["insitu_class"],
            )
        )
    return Inventory(segments=segments, class_names=doc["class_names"], grid=cfg)
