"""Marching-cubes surface extraction and per-vertex feature resampling.

The 256-case triangle table is derived once at import from per-face marching
squares: each face contributes oriented isoline segments (ambiguous diagonal
faces always separate the negative corners), the segments chain into closed
loops on the cell boundary, and each loop is fan-triangulated. Deriving the
table keeps adjacent cells consistent, so the surface cannot crack. No
Chernyaev-style interior disambiguation is applied.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError
from .volume import MultiVolume

log = logging.getLogger(__name__)

# Corner c has coordinates (c & 1, c >> 1 & 1, c >> 2 & 1).
_CORNER_XYZ = [(c & 1, (c >> 1) & 1, (c >> 2) & 1) for c in range(8)]

# Edges grouped by axis; each is (corner-without-bit, corner-with-bit).
_EDGES: list[tuple[int, int]] = (
    [(c, c | 1) for c in (0, 2, 4, 6)]
    + [(c, c | 2) for c in (0, 1, 4, 5)]
    + [(c, c | 4) for c in (0, 1, 2, 3)]
)
_EDGE_AXIS = [0] * 4 + [1] * 4 + [2] * 4
_EDGE_INDEX = {frozenset(e): i for i, e in enumerate(_EDGES)}


def _face_corners(axis: int, side: int) -> list[int]:
    """Face corners in counterclockwise order viewed from outside the cell."""
    a1, a2 = (axis + 1) % 3, (axis + 2) % 3
    uv = [(0, 0), (1, 0), (1, 1), (0, 1)] if side else [(0, 0), (0, 1), (1, 1), (1, 0)]
    return [(side << axis) | (u << a1) | (v << a2) for u, v in uv]


def _face_segments(quad: list[int], neg: list[bool]) -> list[tuple[int, int]]:
    """Directed isoline segments (from-edge, to-edge) on one face.

    For every maximal cyclic run of negative corners [a..b] the isoline enters
    on the run's trailing edge and leaves on its leading edge, which keeps the
    negative region on the segment's left in the outside view.
    """
    flags = [neg[q] for q in quad]
    if all(flags) or not any(flags):
        return []
    segments = []
    for a in range(4):
        if flags[a] and not flags[(a - 1) % 4]:
            b = a
            while flags[(b + 1) % 4]:
                b = (b + 1) % 4
            e_from = _EDGE_INDEX[frozenset((quad[b], quad[(b + 1) % 4]))]
            e_to = _EDGE_INDEX[frozenset((quad[(a - 1) % 4], quad[a]))]
            segments.append((e_from, e_to))
    return segments


def _build_triangle_table() -> list[list[tuple[int, int, int]]]:
    faces = [_face_corners(axis, side) for axis in range(3) for side in range(2)]
    table: list[list[tuple[int, int, int]]] = []
    for case in range(256):
        neg = [(case >> c) & 1 == 1 for c in range(8)]
        succ: dict[int, int] = {}
        for quad in faces:
            for e_from, e_to in _face_segments(quad, neg):
                assert e_from not in succ, f"case {case}: edge {e_from} leaves twice"
                succ[e_from] = e_to
        crossing = {
            i for i, (a, b) in enumerate(_EDGES) if neg[a] != neg[b]
        }
        assert set(succ) == crossing == set(succ.values()), f"case {case}: open isoline"
        triangles: list[tuple[int, int, int]] = []
        remaining = set(succ)
        while remaining:
            start = min(remaining)
            loop = [start]
            nxt = succ[start]
            while nxt != start:
                loop.append(nxt)
                nxt = succ[nxt]
            remaining.difference_update(loop)
            loop.reverse()  # wind triangles so normals point into positive space
            for i in range(1, len(loop) - 1):
                triangles.append((loop[0], loop[i], loop[i + 1]))
        table.append(triangles)
    return table


TRIANGLE_TABLE = _build_triangle_table()


@dataclass
class Mesh:
    """Indexed triangle mesh with optional per-vertex attributes."""

    vertices: np.ndarray  # (N, 3) float64, meters
    triangles: np.ndarray  # (M, 3) int64
    vertex_feats: np.ndarray | None = None  # (N, D) float32, unit rows
    vertex_class: np.ndarray | None = None  # (N,) int32, -1 = unlabeled
    vertex_heat: np.ndarray | None = None  # (N,) float32 in [0, 1]

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if self.triangles.size and (
            self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)
        ):
            raise ValueError("triangle indices out of range")
        if np.any(~np.isfinite(self.vertices)):
            raise ValueError("mesh vertices contain NaN/inf")
        if self.vertex_feats is not None and len(self.vertex_feats) != len(self.vertices):
            raise ValueError("vertex_feats length mismatch")

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)


def empty_mesh() -> Mesh:
    return Mesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))


def extract_mesh(vol: MultiVolume) -> Mesh:
    """Zero level set of the TSDF; cells touching any W = 0 corner are skipped."""
    v = vol.tsdf
    neg = v < 0
    valid = vol.weight > 0

    def cell_corner(arr, c):
        x, y, z = _CORNER_XYZ[c]
        nx, ny, nz = arr.shape
        return arr[x : nx - 1 + x, y : ny - 1 + y, z : nz - 1 + z]

    case = np.zeros(tuple(d - 1 for d in v.shape), dtype=np.uint16)
    ok = np.ones_like(case, dtype=bool)
    for c in range(8):
        case |= cell_corner(neg, c).astype(np.uint16) << c
        ok &= cell_corner(valid, c)
    cells = np.argwhere(ok & (case != 0) & (case != 255))
    if not cells.size:
        return empty_mesh()

    origin = np.asarray(vol.config.origin)
    h = vol.config.voxel_size
    verts: list[np.ndarray] = []
    vert_ids: dict[tuple[int, int, int, int], int] = {}
    tris: list[tuple[int, int, int]] = []

    for i, j, k in cells:
        c_case = int(case[i, j, k])
        tri_edges = TRIANGLE_TABLE[c_case]
        ids = {}
        for e in {e for tri in tri_edges for e in tri}:
            ca, cb = _EDGES[e]
            ax_, ay, az = _CORNER_XYZ[ca]
            bx, by, bz = _CORNER_XYZ[cb]
            a_idx = (i + ax_, j + ay, k + az)
            key = (_EDGE_AXIS[e], *a_idx)
            vid = vert_ids.get(key)
            if vid is None:
                va = v[a_idx]
                vb = v[i + bx, j + by, k + bz]
                t = va / (va - vb)
                pa = origin + (np.asarray(a_idx, dtype=np.float64) + 0.5) * h
                pb = origin + (np.asarray((i + bx, j + by, k + bz), dtype=np.float64) + 0.5) * h
                vid = len(verts)
                verts.append(pa + t * (pb - pa))
                vert_ids[key] = vid
            ids[e] = vid
        for ea, eb, ec in tri_edges:
            a, b, c = ids[ea], ids[eb], ids[ec]
            if a != b and b != c and a != c:  # drop degenerate (zero-valued corners)
                tris.append((a, b, c))

    if not tris:
        return empty_mesh()
    return Mesh(np.asarray(verts), np.asarray(tris, dtype=np.int64))


def trilinear_sample(grid: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Trilinear interpolation on a voxel-center lattice at fractional coords.

    `grid` is (X, Y, Z) or (X, Y, Z, D); `coords` is (N, 3) in lattice units
    (voxel (i,j,k) center at (i,j,k)). Coordinates clamp to the lattice hull.
    """
    scalar = grid.ndim == 3
    g = grid[..., None] if scalar else grid
    nx, ny, nz = g.shape[:3]
    pts = np.asarray(coords, dtype=np.float64).reshape(-1, 3)
    cx = np.clip(pts[:, 0], 0, nx - 1)
    cy = np.clip(pts[:, 1], 0, ny - 1)
    cz = np.clip(pts[:, 2], 0, nz - 1)
    x0 = np.minimum(np.floor(cx).astype(np.int64), nx - 1)
    y0 = np.minimum(np.floor(cy).astype(np.int64), ny - 1)
    z0 = np.minimum(np.floor(cz).astype(np.int64), nz - 1)
    x1, y1, z1 = np.minimum(x0 + 1, nx - 1), np.minimum(y0 + 1, ny - 1), np.minimum(z0 + 1, nz - 1)
    fx = (cx - x0)[:, None]
    fy = (cy - y0)[:, None]
    fz = (cz - z0)[:, None]
    gd = g.astype(np.float64)
    c00 = gd[x0, y0, z0] * (1 - fx) + gd[x1, y0, z0] * fx
    c01 = gd[x0, y0, z1] * (1 - fx) + gd[x1, y0, z1] * fx
    c10 = gd[x0, y1, z0] * (1 - fx) + gd[x1, y1, z0] * fx
    c11 = gd[x0, y1, z1] * (1 - fx) + gd[x1, y1, z1] * fx
    c0 = c00 * (1 - fy) + c10 * fy
    c1 = c01 * (1 - fy) + c11 * fy
    out = c0 * (1 - fz) + c1 * fz
    return out[:, 0] if scalar else out


def resample_vertex_features(vol: MultiVolume, mesh: Mesh, w_min: float = 1.0) -> Mesh:
    """Attach trilinearly interpolated language features and class labels to vertices."""
    if mesh.num_vertices == 0:
        mesh.vertex_feats = np.zeros((0, vol.config.feature_dim), dtype=np.float32)
        mesh.vertex_class = np.zeros((0,), dtype=np.int32)
        return mesh
    origin = np.asarray(vol.config.origin)
    h = vol.config.voxel_size
    g = (mesh.vertices - origin) / h - 0.5
    hi = np.asarray(vol.config.dims, dtype=np.float64) - 1
    outside = np.any((g < 0) | (g > hi), axis=1)
    if outside.any():
        log.warning("%d vertices outside the grid; clamped to boundary", int(outside.sum()))
    feats = trilinear_sample(vol.lang_feat, g)
    norms = np.linalg.norm(feats, axis=1, keepdims=True)
    feats = np.where(norms > 1e-12, feats / np.where(norms > 0, norms, 1.0), 0.0)
    probs = trilinear_sample(vol.class_probs, g)
    fw = trilinear_sample(vol.feat_weight, g)
    labels = np.where(fw >= w_min, probs.argmax(axis=1), -1).astype(np.int32)
    mesh.vertex_feats = feats.astype(np.float32)
    mesh.vertex_class = labels
    return mesh


VMESH_MAGIC = b"VMSH"
_FLAG_FEATURES = 1
_FLAG_HEAT = 2


def export_mesh(mesh: Mesh, path) -> None:
    """Little-endian .vmesh: header, positions, triangles, optional attributes."""
    flags = 0
    feat_dim = 0
    if mesh.vertex_feats is not None and mesh.vertex_class is not None:
        flags |= _FLAG_FEATURES
        feat_dim = mesh.vertex_feats.shape[1] if mesh.vertex_feats.ndim == 2 else 0
    if mesh.vertex_heat is not None:
        flags |= _FLAG_HEAT
    with open(path, "wb") as f:
        f.write(VMESH_MAGIC)
        f.write(struct.pack("<IIII", mesh.num_vertices, mesh.num_triangles, feat_dim, flags))
        f.write(np.ascontiguousarray(mesh.vertices, dtype="<f4").tobytes())
        f.write(np.ascontiguousarray(mesh.triangles, dtype="<u4").tobytes())
        if flags & _FLAG_FEATURES:
            f.write(np.ascontiguousarray(mesh.vertex_feats, dtype="<f4").tobytes())
            f.write(np.ascontiguousarray(mesh.vertex_class, dtype="<i4").tobytes())
        if flags & _FLAG_HEAT:
            f.write(np.ascontiguousarray(mesh.vertex_heat, dtype="<f4").tobytes())


def import_mesh(path) -> Mesh:
    raw = open(path, "rb").read()
    if raw[:4] != VMESH_MAGIC:
        raise FormatError(f"{path}: bad vmesh magic {raw[:4]!r}")
    nv, nt, feat_dim, flags = struct.unpack("<IIII", raw[4:20])
    off = 20

    def block(count, dtype):
        nonlocal off
        size = count * np.dtype(dtype).itemsize
        if len(raw) < off + size:
            raise FormatError(f"{path}: truncated vmesh block")
        out = np.frombuffer(raw[off : off + size], dtype=dtype).copy()
        off += size
        return out

    verts = block(nv * 3, "<f4").reshape(nv, 3).astype(np.float64)
    tris = block(nt * 3, "<u4").reshape(nt, 3).astype(np.int64)
    feats = classes = heat = None
    if flags & _FLAG_FEATURES:
        feats = block(nv * feat_dim, "<f4").reshape(nv, feat_dim)
        classes = block(nv, "<i4")
    if flags & _FLAG_HEAT:
        heat = block(nv, "<f4")
    return Mesh(verts, tris, vertex_feats=feats, vertex_class=classes, vertex_heat=heat)
