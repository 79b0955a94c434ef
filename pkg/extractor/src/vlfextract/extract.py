"""Run extraction over a directory of RGB frames, emitting engine-ready files."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backends import ConstantSegmenter, HashImageBackend
from .formats import write_embeddings, write_vlf
from .tiling import TilingConfig, iter_patches, load_resized

log = logging.getLogger(__name__)

FRAME_SUFFIXES = (".rgb.png", ".png", ".jpg", ".jpeg")


@dataclass
class ExtractorConfig:
    tiling: TilingConfig = field(default_factory=TilingConfig)
    image_backend: object = field(default_factory=HashImageBackend)
    segmenter: object = field(default_factory=ConstantSegmenter)
    out_dir: Path | None = None  # defaults to the frames directory


def find_frames(frames_dir) -> list[Path]:
    frames_dir = Path(frames_dir)
    seen = {}
    for p in sorted(frames_dir.glob("*")):
        name = p.name.lower()
        for suffix in FRAME_SUFFIXES:
            if name.endswith(suffix):
                stem = p.name[: -len(suffix)].rstrip(".")
                seen.setdefault(stem, p)
                break
    return [seen[k] for k in sorted(seen)]


def extract(frames_dir, config: ExtractorConfig) -> dict:
    """Per frame: coarse feature .vlf + semantic .vlf; plus classes.json.

    Returns a summary dict. Zero input images is not an error: the manifest
    is still written (empty class list only if the segmenter has none).
    """
    frames_dir = Path(frames_dir)
    out_dir = Path(config.out_dir) if config.out_dir else frames_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    frames = find_frames(frames_dir)
    rows, cols = config.tiling.grid_shape()
    w, h = config.tiling.resize

    written = []
    for path in frames:
        frame = load_resized(path, config.tiling)
        coords, patches = [], []
        for r, c, patch in iter_patches(frame, config.tiling):
            coords.append((r, c))
            patches.append(patch)
        feats = config.image_backend.embed_patches(patches)
        grid = np.zeros((rows, cols, feats.shape[1]), dtype=np.float32)
        for (r, c), v in zip(coords, feats):
            grid[r, c] = v / np.linalg.norm(v)
        stem = path.name.split(".")[0]
        feat_path = out_dir / f"{stem}.feat.vlf"
        write_vlf(feat_path, grid,
                  footer=(config.tiling.patch_size, config.tiling.stride, w, h))

        sem = config.segmenter.segment(frame)
        sem_path = out_dir / f"{stem}.sem.vlf"
        write_vlf(sem_path, sem)
        written.append(stem)
        log.info("extracted %s: %dx%d patches, %d classes",
                 path.name, rows, cols, sem.shape[2])

    manifest = {
        "class_names": list(getattr(config.segmenter, "class_names", [])),
        "frames": written,
        "tiling": {
            "patch_size": config.tiling.patch_size,
            "stride": config.tiling.stride,
            "resize": list(config.tiling.resize),
            "grid": [rows, cols],
        },
    }
    (out_dir / "classes.json").write_text(json.dumps(manifest["class_names"], indent=1))
    (out_dir / "extract_manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return manifest


def embed_text(strings: list[str], out_path, backend) -> dict[str, np.ndarray]:
    """Unit-normalized keyed text embeddings the engine's query module loads."""
    if not strings:
        raise ValueError("no strings to embed")
    unique = list(dict.fromkeys(strings))
    vectors = backend.embed_texts(unique)
    table = {}
    for name, vec in zip(unique, vectors):
        table[name] = vec / np.linalg.norm(vec)
    write_embeddings(out_path, table)
    return table
