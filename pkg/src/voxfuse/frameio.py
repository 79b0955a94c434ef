"""Frame-set directory format.

frames/NNNNNN.rgb.png     8-bit RGB
frames/NNNNNN.depth.png   16-bit grayscale, millimeters, 0 = invalid
frames/NNNNNN.sem.vlf     per-pixel class distributions (dim = C)
frames/NNNNNN.feat.vlf    coarse patch grid + tiling footer
poses.json                [{frame, intrinsics{fx,fy,cx,cy}, cam_to_world[16]}]
classes.json              optional list of class display names
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError
from .frames import CoarseFeatureMap, Frame

VLF_MAGIC = b"VLF1"


def write_vlf(path, array: np.ndarray, footer: tuple[int, int, int, int] | None = None) -> None:
    """rows x cols x dim float32 little-endian; optional 4 x u32 trailing footer."""
    arr = np.asarray(array, dtype="<f4")
    if arr.ndim != 3:
        raise ValueError(f"vlf arrays are rows x cols x dim, got shape {arr.shape}")
    rows, cols, dim = arr.shape
    with open(path, "wb") as f:
        f.write(VLF_MAGIC)
        f.write(struct.pack("<III", rows, cols, dim))
        f.write(arr.tobytes())
        if footer is not None:
            f.write(struct.pack("<IIII", *footer))


def read_vlf(path):
    """Returns (array, footer-or-None)."""
    raw = Path(path).read_bytes()
    if raw[:4] != VLF_MAGIC:
        raise FormatError(f"{path}: bad vlf magic {raw[:4]!r}")
    rows, cols, dim = struct.unpack("<III", raw[4:16])
    n = rows * cols * dim
    end = 16 + 4 * n
    if len(raw) < end:
        raise FormatError(f"{path}: truncated vlf payload")
    arr = np.frombuffer(raw[16:end], dtype="<f4").reshape(rows, cols, dim).copy()
    rest = raw[end:]
    if not rest:
        return arr, None
    if len(rest) != 16:
        raise FormatError(f"{path}: unexpected {len(rest)} trailing bytes")
    return arr, struct.unpack("<IIII", rest)


def write_depth_png(path, depth_m: np.ndarray) -> None:
    mm = np.clip(np.round(np.asarray(depth_m) * 1000.0), 0, 65535).astype(np.uint16)
    Image.fromarray(mm).save(path)  # uint16 -> 16-bit grayscale PNG


def read_depth_png(path) -> np.ndarray:
    img = Image.open(path)
    arr = np.asarray(img, dtype=np.uint16)
    return arr.astype(np.float64) / 1000.0


def write_rgb_png(path, rgb: np.ndarray) -> None:
    Image.fromarray(np.asarray(rgb, dtype=np.uint8), mode="RGB").save(path)


def read_rgb_png(path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("RGB"), dtype=np.uint8)


def write_frame(
    root,
    index: int,
    rgb: np.ndarray,
    depth_m: np.ndarray,
    semantic_map: np.ndarray,
    coarse: CoarseFeatureMap,
) -> None:
    frames_dir = Path(root) / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{index:06d}"
    write_rgb_png(frames_dir / f"{stem}.rgb.png", rgb)
    write_depth_png(frames_dir / f"{stem}.depth.png", depth_m)
    write_vlf(frames_dir / f"{stem}.sem.vlf", semantic_map)
    w, h = coarse.image_size
    write_vlf(
        frames_dir / f"{stem}.feat.vlf",
        coarse.patch_grid,
        footer=(coarse.patch_size, coarse.stride, w, h),
    )


def write_poses(root, entries: list[dict]) -> None:
    Path(root, "poses.json").write_text(json.dumps(entries, indent=1, sort_keys=True))


def write_classes(root, class_names: list[str]) -> None:
    Path(root, "classes.json").write_text(json.dumps(class_names, indent=1))


def read_classes(root) -> list[str] | None:
    p = Path(root) / "classes.json"
    return json.loads(p.read_text()) if p.exists() else None


def frame_indices(root) -> list[int]:
    frames_dir = Path(root) / "frames"
    if not frames_dir.is_dir():
        raise FormatError(f"{root}: no frames/ directory")
    return sorted(int(p.name.split(".")[0]) for p in frames_dir.glob("*.depth.png"))


def read_frame_set(root):
    """Yield Frame objects in frame-index order."""
    root = Path(root)
    poses_path = root / "poses.json"
    if not poses_path.exists():
        raise FormatError(f"{root}: missing poses.json")
    poses = {e["frame"]: e for e in json.loads(poses_path.read_text())}
    for i in frame_indices(root):
        if i not in poses:
            raise FormatError(f"{root}: frame {i} has no pose entry")
        yield load_frame(root, i, poses[i])


def load_frame(root, index: int, pose_entry: dict) -> Frame:
    frames_dir = Path(root) / "frames"
    stem = f"{index:06d}"
    rgb = read_rgb_png(frames_dir / f"{stem}.rgb.png")
    depth = read_depth_png(frames_dir / f"{stem}.depth.png")
    sem, sem_footer = read_vlf(frames_dir / f"{stem}.sem.vlf")
    if sem_footer is not None:
        raise FormatError(f"frame {index}: semantic vlf must not carry a tiling footer")
    grid, footer = read_vlf(frames_dir / f"{stem}.feat.vlf")
    if footer is None:
        raise FormatError(f"frame {index}: feature vlf missing tiling footer")
    patch_size, stride, img_w, img_h = footer
    coarse = CoarseFeatureMap(
        patch_grid=grid,
        patch_size=patch_size,
        stride=stride,
        image_size=(img_w, img_h),
    )
    intr = pose_entry["intrinsics"]
    pose = np.asarray(pose_entry["cam_to_world"], dtype=np.float64).reshape(4, 4)
    return Frame(
        rgb=rgb,
        depth=depth,
        intrinsics=(intr["fx"], intr["fy"], intr["cx"], intr["cy"]),
        pose=pose,
        semantic_map=sem,
        coarse_feats=coarse,
        view_weight=float(pose_entry.get("view_weight", 1.0)),
    )
