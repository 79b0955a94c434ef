"""Procedural desk-scale scenes with closed-form ground truth.

Objects carry mutually orthogonal unit signature vectors standing in for real
vision-language embeddings; depth comes from analytic ray intersections, so
every downstream stage can be checked against an exact oracle without any ML
model in the loop.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .frameio import write_classes, write_frame, write_poses
from .frames import CoarseFeatureMap, patch_grid_shape
from .query import write_embedding_file
from .segmentation import LabelVolume
from .volume import GridConfig

CLASS_PALETTE = [
    "chair", "table", "bottle", "mug", "plant", "monitor",
    "lamp", "sofa", "box", "ball", "bin", "fan",
]
FLOOR_CLASS = "floor"
BACKGROUND_KEY = "background"


@dataclass
class SynthObject:
    shape: str  # "box" | "sphere"
    center: np.ndarray  # (3,)
    size: np.ndarray  # sphere: [radius]; box: half extents (3,)
    class_id: int
    signature: np.ndarray  # (D,) unit


@dataclass
class SynthScene:
    objects: list[SynthObject]  # index 0 is the floor slab when present
    bounds: tuple[np.ndarray, np.ndarray]  # (min, max) corners
    noise_sigma: float
    class_names: list[str]
    background: np.ndarray  # (D,) unit, used for empty patches
    feature_dim: int
    floor_index: int | None = None

    def user_objects(self) -> list[SynthObject]:
        return [o for i, o in enumerate(self.objects) if i != self.floor_index]


def build_scene(
    num_objects: int,
    rng: np.random.Generator,
    feature_dim: int = 16,
    noise_sigma: float = 0.05,
    include_floor: bool = True,
    room_half: float = 1.5,
) -> SynthScene:
    """Objects on a ring around the room center, each with its own class."""
    if num_objects < 1:
        raise ValueError("scene needs at least one object")
    if num_objects > len(CLASS_PALETTE):
        raise ValueError(f"at most {len(CLASS_PALETTE)} objects supported")
    n_sig = num_objects + (1 if include_floor else 0) + 1  # + background
    if feature_dim < n_sig:
        raise ValueError(
            f"feature_dim {feature_dim} too small for {n_sig} orthogonal signatures"
        )
    q, _ = np.linalg.qr(rng.standard_normal((feature_dim, n_sig)))
    sig_iter = iter(q.T)

    class_names = []
    objects: list[SynthObject] = []
    floor_index = None
    if include_floor:
        class_names.append(FLOOR_CLASS)
        floor_index = 0
        objects.append(
            SynthObject(
                shape="box",
                center=np.array([0.0, 0.0, -0.05]),
                size=np.array([room_half, room_half, 0.05]),
                class_id=0,
                signature=next(sig_iter),
            )
        )
    ring = 0.85 if num_objects > 1 else 0.0
    for i in range(num_objects):
        cls = len(class_names)
        class_names.append(CLASS_PALETTE[i])
        angle = 2 * np.pi * i / num_objects
        xy = ring * np.array([np.cos(angle), np.sin(angle)])
        xy += rng.uniform(-0.05, 0.05, size=2)
        if i % 2 == 0:
            radius = rng.uniform(0.14, 0.20)
            obj = SynthObject(
                shape="sphere",
                center=np.array([xy[0], xy[1], radius]),
                size=np.array([radius]),
                class_id=cls,
                signature=next(sig_iter),
            )
        else:
            half = rng.uniform(0.12, 0.20, size=3)
            obj = SynthObject(
                shape="box",
                center=np.array([xy[0], xy[1], half[2]]),
                size=half,
                class_id=cls,
                signature=next(sig_iter),
            )
        objects.append(obj)
    background = next(sig_iter)
    lo = np.array([-room_half, -room_half, -0.1 if include_floor else 0.0])
    hi = np.array([room_half, room_half, 1.0])
    return SynthScene(
        objects=objects,
        bounds=(lo, hi),
        noise_sigma=noise_sigma,
        class_names=class_names,
        background=background,
        feature_dim=feature_dim,
        floor_index=floor_index,
    )


def sphere_scene(
    rng: np.random.Generator,
    feature_dim: int = 16,
    noise_sigma: float = 0.0,
    radius: float = 0.5,
) -> SynthScene:
    """Single floating sphere, no floor: the geometry-accuracy fixture."""
    q, _ = np.linalg.qr(rng.standard_normal((feature_dim, 2)))
    center = np.array([0.0, 0.0, 0.6])
    obj = SynthObject(shape="sphere", center=center, size=np.array([radius]),
                      class_id=0, signature=q.T[0])
    pad = radius + 0.2
    return SynthScene(
        objects=[obj],
        bounds=(center - pad, center + pad),
        noise_sigma=noise_sigma,
        class_names=["ball"],
        background=q.T[1],
        feature_dim=feature_dim,
        floor_index=None,
    )


def _ray_sphere(origin, dirs, center, radius):
    oc = origin - center
    a = np.einsum("...i,...i->...", dirs, dirs)
    b = 2.0 * np.einsum("...i,i->...", dirs, oc)
    c = oc @ oc - radius * radius
    disc = b * b - 4 * a * c
    hit = disc >= 0
    sq = np.sqrt(np.where(hit, disc, 0.0))
    t = (-b - sq) / (2 * a)
    return np.where(hit & (t > 1e-6), t, np.inf)


def _ray_box(origin, dirs, center, half):
    lo = center - half
    hi = center + half
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        t1 = (lo - origin) * inv
        t2 = (hi - origin) * inv
    tmin = np.minimum(t1, t2).max(axis=-1)
    tmax = np.maximum(t1, t2).min(axis=-1)
    hit = (tmax >= tmin) & (tmax > 1e-6) & (tmin > 1e-6)
    return np.where(hit, tmin, np.inf)


def look_at_pose(eye, target, up=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Camera-to-world with +z forward, +x right, +y down in camera frame."""
    eye = np.asarray(eye, dtype=np.float64)
    fwd = np.asarray(target, dtype=np.float64) - eye
    fwd /= np.linalg.norm(fwd)
    right = np.cross(fwd, np.asarray(up, dtype=np.float64))
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    pose = np.eye(4)
    pose[:3, 0] = right
    pose[:3, 1] = down
    pose[:3, 2] = fwd
    pose[:3, 3] = eye
    return pose


def render_view(scene: SynthScene, pose: np.ndarray, intrinsics, image_size):
    """Exact depth and front-most object index per pixel (-1 where nothing hit)."""
    w, h = image_size
    fx, fy, cx, cy = intrinsics
    u, v = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    dirs_cam = np.stack([(u - cx) / fx, (v - cy) / fy, np.ones_like(u)], axis=-1)
    dirs = dirs_cam @ pose[:3, :3].T  # rays with unit camera-z, so t == depth
    eye = pose[:3, 3]
    ts = np.full((len(scene.objects), h, w), np.inf)
    for i, obj in enumerate(scene.objects):
        if obj.shape == "sphere":
            ts[i] = _ray_sphere(eye, dirs, obj.center, obj.size[0])
        elif obj.shape == "box":
            ts[i] = _ray_box(eye, dirs, obj.center, obj.size)
        else:
            raise ValueError(f"unknown shape {obj.shape!r}")
    hit = ts.argmin(axis=0)
    depth = ts.min(axis=0)
    miss = ~np.isfinite(depth)
    return np.where(miss, 0.0, depth), np.where(miss, -1, hit)


_COLORS = np.array(
    [[200, 60, 60], [60, 160, 60], [60, 90, 200], [200, 160, 40], [150, 60, 180],
     [40, 180, 180], [230, 120, 40], [120, 120, 220], [180, 200, 60], [90, 60, 30],
     [240, 100, 160], [100, 200, 140], [70, 70, 70]],
    dtype=np.uint8,
)


def render_frames(
    scene: SynthScene,
    out_dir,
    n_views: int,
    rng: np.random.Generator,
    image_size: tuple[int, int] = (160, 120),
    patch_size: int = 16,
    stride: int = 8,
    orbit_radius: float | None = None,
    orbit_height: float | None = None,
    target: np.ndarray | None = None,
) -> Path:
    """Write a complete frame-set directory from an orbit around the scene."""
    if n_views < 1:
        raise ValueError("n_views must be >= 1")
    if not scene.objects:
        raise ValueError("degenerate scene: no objects")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    w, h = image_size
    fx = fy = 0.9 * w
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    lo, hi = scene.bounds
    center = (lo + hi) / 2.0
    if target is None:
        target = np.array([center[0], center[1], 0.25 if scene.floor_index is not None else center[2]])
    if orbit_radius is None:
        orbit_radius = 1.15 * float(np.linalg.norm((hi - lo)[:2]) / 2.0)
    if orbit_height is None:
        orbit_height = target[2] + 0.75 if scene.floor_index is not None else target[2]

    rows, cols = patch_grid_shape(image_size, patch_size, stride)
    half = (patch_size - 1) / 2.0
    pc_u = np.rint(half + np.arange(cols) * stride).astype(int)
    pc_v = np.rint(half + np.arange(rows) * stride).astype(int)
    num_classes = len(scene.class_names)

    pose_entries = []
    for i in range(n_views):
        angle = 2 * np.pi * i / n_views
        eye = target + np.array(
            [orbit_radius * np.cos(angle), orbit_radius * np.sin(angle), 0.0]
        )
        eye[2] = orbit_height
        pose = look_at_pose(eye, target)
        depth, hit = render_view(scene, pose, (fx, fy, cx, cy), image_size)

        sem = np.zeros((h, w, num_classes), dtype=np.float32)
        rgb = np.full((h, w, 3), 30, dtype=np.uint8)
        for oi, obj in enumerate(scene.objects):
            mask = hit == oi
            sem[mask, obj.class_id] = 1.0
            rgb[mask] = _COLORS[obj.class_id % len(_COLORS)]

        grid = np.empty((rows, cols, scene.feature_dim), dtype=np.float64)
        patch_hit = hit[np.ix_(pc_v, pc_u)]
        for r in range(rows):
            for s in range(cols):
                oi = patch_hit[r, s]
                if oi < 0:
                    grid[r, s] = scene.background
                else:
                    vec = scene.objects[oi].signature
                    if scene.noise_sigma > 0:
                        vec = vec + rng.normal(0.0, scene.noise_sigma, scene.feature_dim)
                        vec = vec / np.linalg.norm(vec)
                    grid[r, s] = vec
        coarse = CoarseFeatureMap(
            patch_grid=grid.astype(np.float32),
            patch_size=patch_size,
            stride=stride,
            image_size=image_size,
        )
        write_frame(out_dir, i, rgb, depth, sem, coarse)
        pose_entries.append(
            {
                "frame": i,
                "intrinsics": {"fx": fx, "fy": fy, "cx": cx, "cy": cy},
                "cam_to_world": [float(x) for x in pose.reshape(-1)],
            }
        )

    write_poses(out_dir, pose_entries)
    write_classes(out_dir, scene.class_names)
    embeddings = {
        scene.class_names[o.class_id]: o.signature for o in scene.objects
    }
    embeddings[BACKGROUND_KEY] = scene.background
    write_embedding_file(out_dir / "text_embeddings.vle", embeddings)
    (out_dir / "ground_truth.json").write_text(json.dumps(scene_ground_truth(scene), indent=1))
    return out_dir


def scene_ground_truth(scene: SynthScene) -> dict:
    lo, hi = scene.bounds
    return {
        "class_names": scene.class_names,
        "noise_sigma": scene.noise_sigma,
        "bounds": {"min": lo.tolist(), "max": hi.tolist()},
        "floor_index": scene.floor_index,
        "objects": [
            {
                "index": i,
                "shape": o.shape,
                "class_id": o.class_id,
                "class_name": scene.class_names[o.class_id],
                "center": o.center.tolist(),
                "size": o.size.tolist(),
            }
            for i, o in enumerate(scene.objects)
        ],
    }


def suggested_grid(
    scene: SynthScene, voxel_size: float = 0.04, num_classes: int | None = None
) -> GridConfig:
    lo, hi = scene.bounds
    margin = 2 * voxel_size
    origin = lo - margin
    dims = np.ceil((hi - lo + 2 * margin) / voxel_size).astype(int)
    return GridConfig(
        origin=tuple(origin),
        voxel_size=voxel_size,
        dims=tuple(int(d) for d in dims),
        num_classes=num_classes or len(scene.class_names),
        feature_dim=scene.feature_dim,
    )


def oracle_components(label_vol: LabelVolume) -> list[frozenset[int]]:
    """Union-find over all same-label 6-adjacent voxel pairs; the flood-fill oracle."""
    labels = label_vol.labels
    flat = labels.reshape(-1)
    n = flat.size
    parent = np.arange(n, dtype=np.int64)

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    dims = labels.shape
    strides = (dims[1] * dims[2], dims[2], 1)
    for axis in range(3):
        sl_a = [slice(None)] * 3
        sl_b = [slice(None)] * 3
        sl_a[axis] = slice(0, dims[axis] - 1)
        sl_b[axis] = slice(1, dims[axis])
        a = labels[tuple(sl_a)]
        b = labels[tuple(sl_b)]
        same = (a == b) & (a != -1)
        coords = np.argwhere(same)
        if not coords.size:
            continue
        fa = coords @ np.asarray(strides)
        fb = fa + strides[axis]
        for pa, pb in zip(fa, fb):
            ra, rb = find(int(pa)), find(int(pb))
            if ra != rb:
                parent[rb] = ra
    groups: dict[int, list[int]] = {}
    for i in np.nonzero(flat != -1)[0]:
        groups.setdefault(find(int(i)), []).append(int(i))
    return [frozenset(v) for v in groups.values()]


def two_scan_fixture(
    scene: SynthScene,
    root,
    remove: int | None = None,
    rng: np.random.Generator | None = None,
    n_views: int = 24,
    jitter: float = 0.0,
    **render_kw,
) -> dict:
    """scan_a/ and scan_b/ frame sets plus ground_truth.json.

    Scan B re-renders with fresh noise, optionally drops one user object, and
    can jitter the remaining objects to show re-identification needs no
    spatial alignment.
    """
    rng = rng or np.random.default_rng()
    root = Path(root)
    user = scene.user_objects()
    if remove is not None and not 0 <= remove < len(user):
        raise ValueError(f"remove index {remove} out of range for {len(user)} objects")

    render_frames(scene, root / "scan_a", n_views, rng, **render_kw)

    objects_b = []
    removed_name = None
    ui = -1
    for i, obj in enumerate(scene.objects):
        if i == scene.floor_index:
            objects_b.append(obj)
            continue
        ui += 1
        if remove is not None and ui == remove:
            removed_name = scene.class_names[obj.class_id]
            continue
        moved = obj
        if jitter > 0:
            shift = rng.uniform(-jitter, jitter, size=2)
            center = obj.center.copy()
            center[:2] += shift
            moved = replace(obj, center=center)
        objects_b.append(moved)
    scene_b = replace(scene, objects=objects_b,
                      floor_index=0 if scene.floor_index is not None else None)
    render_frames(scene_b, root / "scan_b", n_views, rng, **render_kw)

    truth = {
        "removed_index": remove,
        "expected_missing": [removed_name] if removed_name else [],
        "expected_unchanged": [
            scene.class_names[o.class_id]
            for o in user
            if scene.class_names[o.class_id] != removed_name
        ],
        "scene": scene_ground_truth(scene),
    }
    (root / "ground_truth.json").write_text(json.dumps(truth, indent=1))
    return truth
