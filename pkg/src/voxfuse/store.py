"""Versioned scene store: append-only commits, one directory per version.

Store layout (all JSON sorted-key, all binaries little-endian):

    <root>/manifest.json
    <root>/scenes/<scene_id>/versions/NNNNNN/
        version.json      metadata + per-file sha256
        inventory.json    + segments/*.feat.vlf sidecars
        mesh.vmesh
        volume.mvol       optional (needed to train)
        model.ism         optional in-situ checkpoint
        embeddings.vle    optional text-embedding table
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import time
from dataclasses import dataclass
from pathlib import Path

from .errors import StoreError
from .insitu.model import InSituModel, load_checkpoint, save_checkpoint
from .meshing import Mesh, export_mesh, import_mesh
from .query import HashEmbedder, LookupEmbedder
from .segmentation import Inventory, load_inventory, save_inventory
from .volume import MultiVolume, load_volume, save_volume

STORE_SCHEMA = 1


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json_atomic(path: Path, doc) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(doc, sort_keys=True, indent=1))
    os.replace(tmp, path)


def _dir_size(path: Path) -> int:
    return sum(p.stat().st_size for p in path.rglob("*") if p.is_file())


@dataclass
class SceneVersion:
    """Loaded version metadata; content is lazily read and checksum-verified."""

    version_id: int
    scene_id: str
    timestamp: float
    path: Path
    content_hash: str
    files: dict[str, str]
    mesh_ref: str
    volume_ref: str | None
    model_ref: str | None
    embeddings_ref: str | None

    def _verified(self, name: str) -> Path:
        p = self.path / name
        if not p.exists():
            raise StoreError(f"version {self.version_id}: missing {name}")
        want = self.files.get(name)
        if want and _sha256(p) != want:
            raise StoreError(f"version {self.version_id}: checksum mismatch on {name}")
        return p

    def load_inventory(self) -> Inventory:
        self._verified("inventory.json")
        return load_inventory(self.path)

    def load_mesh(self) -> Mesh:
        return import_mesh(self._verified(self.mesh_ref))

    def mesh_bytes(self) -> bytes:
        return self._verified(self.mesh_ref).read_bytes()

    def load_volume(self) -> MultiVolume:
        if not self.volume_ref:
            raise StoreError(f"version {self.version_id} was committed without a volume")
        return load_volume(self._verified(self.volume_ref))

    def load_model(self) -> InSituModel:
        if not self.model_ref:
            raise StoreError(
                f"version {self.version_id} has no trained model; train it first"
            )
        return load_checkpoint(self._verified(self.model_ref))

    def embedder(self, feature_dim: int):
        if self.embeddings_ref and (self.path / self.embeddings_ref).exists():
            return LookupEmbedder.from_file(self._verified(self.embeddings_ref))
        return HashEmbedder(feature_dim)


class SceneStore:
    def __init__(self, root):
        self.root = Path(root)
        manifest = self.root / "manifest.json"
        if not manifest.exists():
            raise StoreError(f"{root} is not a scene store (no manifest.json)")
        doc = json.loads(manifest.read_text())
        if doc.get("schema") != STORE_SCHEMA:
            raise StoreError(f"unsupported store schema {doc.get('schema')}")

    @classmethod
    def create(cls, root) -> "SceneStore":
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        manifest = root / "manifest.json"
        if manifest.exists():
            raise StoreError(f"{root} already contains a store")
        _write_json_atomic(
            manifest,
            {"schema": STORE_SCHEMA, "next_version": 1, "versions": {}, "last_timestamp": 0.0},
        )
        (root / "scenes").mkdir(exist_ok=True)
        return cls(root)

    @classmethod
    def open_or_create(cls, root) -> "SceneStore":
        if (Path(root) / "manifest.json").exists():
            return cls(root)
        return cls.create(root)

    def _manifest(self) -> dict:
        return json.loads((self.root / "manifest.json").read_text())

    def scenes(self) -> list[dict]:
        manifest = self._manifest()
        counts: dict[str, int] = {}
        for scene in manifest["versions"].values():
            counts[scene] = counts.get(scene, 0) + 1
        out = []
        for scene_id in sorted(counts):
            sdir = self.root / "scenes" / scene_id
            out.append(
                {
                    "scene_id": scene_id,
                    "num_versions": counts[scene_id],
                    "size_bytes": _dir_size(sdir) if sdir.exists() else 0,
                }
            )
        return out

    def versions(self, scene_id: str) -> list[SceneVersion]:
        manifest = self._manifest()
        ids = sorted(
            int(v) for v, scene in manifest["versions"].items() if scene == scene_id
        )
        return [self.version(v) for v in ids]

    def version(self, version_id: int) -> SceneVersion:
        manifest = self._manifest()
        scene = manifest["versions"].get(str(version_id))
        if scene is None:
            raise StoreError(f"no version {version_id} in store")
        vdir = self.root / "scenes" / scene / "versions" / f"{version_id:06d}"
        meta_path = vdir / "version.json"
        if not meta_path.exists():
            raise StoreError(f"version {version_id}: directory missing version.json")
        meta = json.loads(meta_path.read_text())
        return SceneVersion(
            version_id=meta["version_id"],
            scene_id=meta["scene_id"],
            timestamp=meta["timestamp"],
            path=vdir,
            content_hash=meta["content_hash"],
            files=meta["files"],
            mesh_ref=meta["mesh_ref"],
            volume_ref=meta.get("volume_ref"),
            model_ref=meta.get("model_ref"),
            embeddings_ref=meta.get("embeddings_ref"),
        )

    def _next_version_id(self, manifest: dict) -> int:
        next_id = int(manifest["next_version"])
        # orphaned dirs from an interrupted commit must never be reused
        for vdir in (self.root / "scenes").glob("*/versions/[0-9]*"):
            try:
                next_id = max(next_id, int(vdir.name) + 1)
            except ValueError:
                continue
        return next_id

    def commit_version(
        self,
        scene_id: str,
        inventory: Inventory,
        mesh: Mesh,
        volume: MultiVolume | None = None,
        model: InSituModel | None = None,
        embeddings_path=None,
        timestamp: float | None = None,
    ) -> int:
        """Durable, atomic commit; returns the new store-global version id."""
        manifest = self._manifest()
        version_id = self._next_version_id(manifest)
        ts = time.time() if timestamp is None else float(timestamp)
        ts = max(ts, float(manifest.get("last_timestamp", 0.0)))

        vroot = self.root / "scenes" / scene_id / "versions"
        vroot.mkdir(parents=True, exist_ok=True)
        final = vroot / f"{version_id:06d}"
        tmp = vroot / f".tmp-{version_id:06d}"
        if tmp.exists():
            shutil.rmtree(tmp)
        tmp.mkdir()
        try:
            save_inventory(inventory, tmp)
            export_mesh(mesh, tmp / "mesh.vmesh")
            refs = {"mesh_ref": "mesh.vmesh", "volume_ref": None,
                    "model_ref": None, "embeddings_ref": None}
            if volume is not None:
                save_volume(volume, tmp / "volume.mvol")
                refs["volume_ref"] = "volume.mvol"
            if model is not None:
                save_checkpoint(model, tmp / "model.ism")
                refs["model_ref"] = "model.ism"
            if embeddings_path is not None:
                shutil.copyfile(embeddings_path, tmp / "embeddings.vle")
                refs["embeddings_ref"] = "embeddings.vle"

            hasher = hashlib.sha256()
            for name in ["inventory.json", "mesh.vmesh", "volume.mvol", "model.ism"]:
                p = tmp / name
                if p.exists():
                    hasher.update(p.read_bytes())
            files = {
                str(p.relative_to(tmp)): _sha256(p)
                for p in sorted(tmp.rglob("*"))
                if p.is_file()
            }
            _write_json_atomic(
                tmp / "version.json",
                {
                    "version_id": version_id,
                    "scene_id": scene_id,
                    "timestamp": ts,
                    "content_hash": hasher.hexdigest(),
                    "files": files,
                    **refs,
                },
            )
            os.replace(tmp, final)
        except Exception:
            if tmp.exists():
                shutil.rmtree(tmp)
            raise

        manifest["versions"][str(version_id)] = scene_id
        manifest["next_version"] = version_id + 1
        manifest["last_timestamp"] = ts
        _write_json_atomic(self.root / "manifest.json", manifest)
        return version_id

    def _rewrite_meta(self, version: SceneVersion, **changes) -> None:
        meta = json.loads((version.path / "version.json").read_text())
        meta.update(changes)
        meta["files"] = {
            str(p.relative_to(version.path)): _sha256(p)
            for p in sorted(version.path.rglob("*"))
            if p.is_file() and p.name != "version.json"
        }
        _write_json_atomic(version.path / "version.json", meta)

    def update_inventory(self, version: SceneVersion, inventory: Inventory) -> None:
        """Personalization edits rewrite the version's inventory in place."""
        save_inventory(inventory, version.path)
        self._rewrite_meta(version)

    def attach_model(self, version: SceneVersion, model: InSituModel, report=None) -> None:
        save_checkpoint(model, version.path / "model.ism")
        if report is not None:
            _write_json_atomic(
                version.path / "train_report.json",
                {
                    "epochs_run": report.epochs_run,
                    "best_accuracy": report.best_accuracy,
                    "stopped_reason": report.stopped_reason,
                    "loss_curve": report.loss_curve,
                    "accuracy_curve": report.accuracy_curve,
                },
            )
        self._rewrite_meta(version, model_ref="model.ism")
