"""User personalization actions: merge, rename, remember."""

from __future__ import annotations

import numpy as np

from .segmentation import Inventory, ObjectSegment


def apply_merge(inv: Inventory, segment_ids: list[int], name: str) -> Inventory:
    """Fuse fragmented segments into one named, remembered segment.

    The survivor takes the union of voxels and features, the class of its
    largest part, and a fresh id; the merged ids are retired. Connectivity is
    intentionally not re-checked: merged fragments may be spatially disjoint.
    """
    if len(segment_ids) < 2:
        raise ValueError("merge needs at least two segment ids")
    if len(set(segment_ids)) != len(segment_ids):
        raise ValueError("duplicate segment id in merge request")
    if not name:
        raise ValueError("merge needs a non-empty name")
    parts = [inv.get(sid) for sid in segment_ids]

    largest = max(parts, key=lambda s: (s.voxel_count, -s.segment_id))
    voxels = np.concatenate([p.voxels for p in parts])
    feats = np.concatenate([p.voxel_feats for p in parts])
    order = np.lexsort((voxels[:, 2], voxels[:, 1], voxels[:, 0]))
    voxels, feats = voxels[order], feats[order]
    origin = np.asarray(inv.grid.origin)
    centroid = origin + (voxels.mean(axis=0) + 0.5) * inv.grid.voxel_size

    merged = ObjectSegment(
        segment_id=inv.next_segment_id(),
        class_id=largest.class_id,
        voxels=voxels,
        centroid=centroid,
        voxel_feats=feats,
        auto_name=largest.auto_name,
        user_name=name,
        remembered=True,
    )
    retired = set(segment_ids)
    inv.segments = [s for s in inv.segments if s.segment_id not in retired]
    inv.segments.append(merged)
    return inv


def apply_rename(inv: Inventory, segment_id: int, name: str) -> Inventory:
    """Customize a segment's label; renaming marks it remembered."""
    if not name:
        raise ValueError("rename needs a non-empty name")
    seg = inv.get(segment_id)
    seg.user_name = name
    seg.remembered = True
    return inv


def apply_remember(inv: Inventory, segment_id: int) -> Inventory:
    """Track a segment as-is; its label stays the generated one unless renamed."""
    seg = inv.get(segment_id)
    seg.remembered = True
    return inv
