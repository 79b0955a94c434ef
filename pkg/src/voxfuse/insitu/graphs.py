"""Sparse graph sampling from object segments and the kNN edge rule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..segmentation import Inventory, ObjectSegment, label_voxels
from ..volume import MultiVolume

DEFAULT_GRAPH_SIZE = 30
DEFAULT_NULL_RADIUS = 8  # voxels, Chebyshev


@dataclass
class ObjectGraph:
    """Stochastically sampled voxel graph; node attributes are language features."""

    nodes: np.ndarray  # (N, D) float64, unit rows
    source: int | None = None  # segment id, None for null samples

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=np.float64)


def _normalize_rows(feats: np.ndarray) -> np.ndarray:
    feats = np.asarray(feats, dtype=np.float64)
    norms = np.linalg.norm(feats, axis=1, keepdims=True)
    return feats / np.where(norms > 1e-12, norms, 1.0)


def _draw(count: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform without replacement when possible, with replacement otherwise."""
    if count >= n:
        return rng.choice(count, size=n, replace=False)
    return rng.integers(0, count, size=n)


def sample_object_graph(
    seg: ObjectSegment, n: int = DEFAULT_GRAPH_SIZE, rng: np.random.Generator | None = None
) -> ObjectGraph:
    if seg.voxel_count == 0:
        raise ValueError(f"segment {seg.segment_id} has no voxels")
    rng = rng or np.random.default_rng()
    pick = _draw(seg.voxel_count, n, rng)
    return ObjectGraph(nodes=_normalize_rows(seg.voxel_feats[pick]), source=seg.segment_id)


def eligible_null_voxels(inv: Inventory, vol: MultiVolume) -> np.ndarray:
    """(M, 3) labeled voxels that belong to no personalized segment."""
    labels = label_voxels(vol)
    eligible = labels.labels != -1
    for seg in inv.personalized():
        vox = seg.voxels
        eligible[vox[:, 0], vox[:, 1], vox[:, 2]] = False
    return np.argwhere(eligible)


def sample_null_graph(
    inv: Inventory,
    vol: MultiVolume,
    n: int = DEFAULT_GRAPH_SIZE,
    rng: np.random.Generator | None = None,
    radius: int = DEFAULT_NULL_RADIUS,
    eligible: np.ndarray | None = None,
) -> ObjectGraph:
    """Null-class graph from a random spatial neighborhood of non-personalized voxels.

    `eligible` lets callers precompute the candidate set once per training run.
    """
    rng = rng or np.random.default_rng()
    if eligible is None:
        eligible = eligible_null_voxels(inv, vol)
    if len(eligible) < n:
        raise ValueError(
            f"scene has {len(eligible)} eligible null voxels, need at least {n}"
        )
    seed = eligible[rng.integers(0, len(eligible))]
    near = np.all(np.abs(eligible - seed) <= radius, axis=1)
    pool = eligible[near] if int(near.sum()) >= n else eligible
    pick = _draw(len(pool), n, rng)
    vox = pool[pick]
    feats = vol.lang_feat[vox[:, 0], vox[:, 1], vox[:, 2]]
    return ObjectGraph(nodes=_normalize_rows(feats), source=None)


def knn_edges(node_feats: np.ndarray, k: int) -> np.ndarray:
    """(N, k) indices: for each node, its k nearest neighbors in feature space.

    Euclidean distance, self excluded, distance ties broken by lower index.
    """
    x = np.asarray(node_feats, dtype=np.float64)
    n = len(x)
    if k >= n:
        raise ValueError(f"k={k} must be < number of nodes {n}")
    diff = x[:, None, :] - x[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(d2, np.inf)
    order = np.argsort(d2, axis=1, kind="stable")
    return order[:, :k]
