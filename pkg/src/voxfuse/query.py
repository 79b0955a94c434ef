"""Open-vocabulary spatial search: score mesh vertices against a text query
relative to negatives drawn from the scene's own class names."""

from __future__ import annotations

import hashlib
import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError
from .meshing import Mesh
from .segmentation import Inventory

log = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 0.07


@dataclass(frozen=True)
class QueryEmbedding:
    text: str
    vector: np.ndarray  # (D,) unit norm

    def __post_init__(self):
        vec = np.asarray(self.vector, dtype=np.float64)
        n = np.linalg.norm(vec)
        if abs(n - 1.0) > 1e-4:
            raise ValueError(f"query vector norm {n} not within 1e-4 of 1")
        object.__setattr__(self, "vector", vec)


@dataclass
class NegativeSet:
    entries: list[tuple[str, np.ndarray]]

    def __post_init__(self):
        names = [n for n, _ in self.entries]
        if len(set(names)) != len(names):
            raise ValueError("negative names must be unique")
        for name, vec in self.entries:
            if abs(np.linalg.norm(vec) - 1.0) > 1e-4:
                raise ValueError(f"negative '{name}' is not unit norm")

    def matrix(self) -> np.ndarray:
        if not self.entries:
            return np.zeros((0, 0))
        return np.stack([v for _, v in self.entries])


class HashEmbedder:
    """Deterministic stand-in embedder: sha256 of the text seeds a unit vector."""

    def __init__(self, dim: int):
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        digest = hashlib.sha256(text.encode("utf-8")).digest()
        seed = int.from_bytes(digest[:8], "little")
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(self.dim)
        return v / np.linalg.norm(v)


class LookupEmbedder:
    """Keyed embedding table (written by the extractor or the synthesizer).

    Falls back to the hash embedder for unknown texts so ad-hoc queries still
    resolve to something deterministic.
    """

    def __init__(self, table: dict[str, np.ndarray], dim: int):
        self.table = {k: np.asarray(v, dtype=np.float64) for k, v in table.items()}
        self.dim = dim
        self._fallback = HashEmbedder(dim)

    @classmethod
    def from_file(cls, path) -> "LookupEmbedder":
        table, dim = read_embedding_file(path)
        return cls(table, dim)

    def embed(self, text: str) -> np.ndarray:
        vec = self.table.get(text)
        if vec is None:
            log.warning("no stored embedding for %r; using hash fallback", text)
            return self._fallback.embed(text)
        return vec / np.linalg.norm(vec)


VLE_MAGIC = b"VLE1"


def write_embedding_file(path, table: dict[str, np.ndarray]) -> None:
    """Keyed unit vectors: magic, u32 count, u32 dim, then (name, f32 vector) pairs."""
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


def read_embedding_file(path) -> tuple[dict[str, np.ndarray], int]:
    raw = Path(path).read_bytes()
    if raw[:4] != VLE_MAGIC:
        raise FormatError(f"{path}: bad embedding-file magic {raw[:4]!r}")
    count, dim = struct.unpack("<II", raw[4:12])
    off = 12
    table: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<I", raw[off : off + 4])
        off += 4
        name = raw[off : off + nlen].decode("utf-8")
        off += nlen
        vec = np.frombuffer(raw[off : off + 4 * dim], dtype="<f4").astype(np.float64)
        off += 4 * dim
        table[name] = vec
    return table, dim


def embed_query(embedder, text: str) -> QueryEmbedding:
    return QueryEmbedding(text=text, vector=embedder.embed(text))


def build_negative_set(
    inventory: Inventory, embedder, extra_negatives: list[str] | None = None
) -> NegativeSet:
    """One negative per distinct class name present in the inventory."""
    names = sorted({inventory.class_names[s.class_id] for s in inventory.segments})
    if not names:
        log.warning("empty inventory: scoring degenerates to heat 1 everywhere")
    for extra in extra_negatives or []:
        if extra not in names:
            names.append(extra)
    return NegativeSet(entries=[(n, embedder.embed(n)) for n in names])


def score_vertices(
    mesh: Mesh,
    query: QueryEmbedding,
    negatives: NegativeSet,
    temperature: float = DEFAULT_TEMPERATURE,
) -> np.ndarray:
    """Softmax of query similarity against the negatives, per vertex, in (0, 1]."""
    if mesh.vertex_feats is None:
        raise ValueError("mesh has no vertex features; resample before scoring")
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    feats = mesh.vertex_feats.astype(np.float64)
    s_pos = feats @ query.vector
    neg = negatives.matrix()
    if not len(neg):
        return np.ones(len(feats))
    s_neg = feats @ neg.T  # (N, J)
    logits = np.concatenate([s_pos[:, None], s_neg], axis=1) / temperature
    logits -= logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    return e[:, 0] / e.sum(axis=1)


def normalize_heat(heat: np.ndarray) -> np.ndarray:
    """Percentile-clipped min-max rescale for display; degenerate ranges go to 0."""
    heat = np.asarray(heat, dtype=np.float64)
    if heat.size == 0:
        raise ValueError("normalize_heat needs at least one vertex")
    lo, hi = np.percentile(heat, [5.0, 95.0])
    clipped = np.clip(heat, lo, hi)
    if hi <= lo:
        return np.zeros_like(heat)
    return (clipped - lo) / (hi - lo)


def rank_segments(
    mesh: Mesh, heat: np.ndarray, inventory: Inventory, top_k: int | None = None
) -> list[dict]:
    """Segments ranked by mean vertex heat; vertices assign to segments by label.

    A vertex belongs to the nearest segment of its own class (by centroid), so
    rankings survive without any per-vertex segment id in the mesh format.
    """
    if mesh.vertex_class is None:
        raise ValueError("mesh has no vertex classes")
    results = []
    verts = mesh.vertices
    labels = mesh.vertex_class
    by_class: dict[int, list] = {}
    for seg in inventory.segments:
        by_class.setdefault(seg.class_id, []).append(seg)
    for cls, segs in by_class.items():
        vidx = np.nonzero(labels == cls)[0]
        if not vidx.size:
            for seg in segs:
                results.append({"segment": seg, "mean_heat": 0.0, "vertices": 0})
            continue
        centroids = np.stack([s.centroid for s in segs])
        d = np.linalg.norm(verts[vidx][:, None, :] - centroids[None, :, :], axis=2)
        owner = d.argmin(axis=1)
        for si, seg in enumerate(segs):
            mine = vidx[owner == si]
            results.append(
                {
                    "segment": seg,
                    "mean_heat": float(heat[mine].mean()) if mine.size else 0.0,
                    "vertices": int(mine.size),
                }
            )
    results.sort(key=lambda r: (-r["mean_heat"], r["segment"].segment_id))
    ranked = [
        {
            "segment_id": r["segment"].segment_id,
            "label": r["segment"].label,
            "class": inventory.class_names[r["segment"].class_id],
            "mean_heat": r["mean_heat"],
            "vertices": r["vertices"],
        }
        for r in results
    ]
    return ranked[:top_k] if top_k else ranked
