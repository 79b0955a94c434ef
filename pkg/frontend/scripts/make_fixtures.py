"""Capture real engine responses as test fixtures for the browser UI.

Builds a 3-object two-scan store (object index 1 removed in scan B), trains
the in-situ model, and records the exact bytes every UI-facing endpoint
returns. Run from the repo root:

    python3 frontend/scripts/make_fixtures.py
"""

import json
import sys
import time
from pathlib import Path
from tempfile import TemporaryDirectory

import numpy as np
from fastapi.testclient import TestClient

from voxfuse.pipeline import fuse_frames
from voxfuse.service import create_app
from voxfuse.store import SceneStore
from voxfuse.synthkit import build_scene, two_scan_fixture

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(42)
    scene = build_scene(3, rng, feature_dim=16, noise_sigma=0.05)
    with TemporaryDirectory() as td:
        td = Path(td)
        truth = two_scan_fixture(scene, td / "fx", remove=1, rng=rng, n_views=16,
                                 image_size=(140, 105), patch_size=8, stride=4)
        store = SceneStore.create(td / "store")
        for scan in ("scan_a", "scan_b"):
            r = fuse_frames(td / "fx" / scan, voxel_size=0.045)
            store.commit_version(
                "default", r.inventory, r.mesh, volume=r.volume,
                embeddings_path=td / "fx" / scan / "text_embeddings.vle",
                timestamp=float(len(store.scenes()) + 1),
            )
        client = TestClient(create_app(store))

        inv = client.get("/versions/1/inventory").json()
        objects = [s for s in inv["segments"] if s["class_name"] != "floor"]
        client.post("/versions/1/actions",
                    json={"action": "rename", "segment_id": objects[0]["segment_id"],
                          "name": "Joe's thermos"})
        for o in objects[1:]:
            client.post("/versions/1/actions",
                        json={"action": "remember", "segment_id": o["segment_id"]})
        job = client.post("/versions/1/train", json={"seed": 0}).json()["job_id"]
        while True:
            status = client.get(f"/jobs/{job}").json()
            if status["status"] != "running":
                break
            time.sleep(0.2)
        assert status["status"] == "done", status

        (OUT / "scenes.json").write_bytes(client.get("/scenes").content)
        (OUT / "versions.json").write_bytes(client.get("/scenes/default/versions").content)
        (OUT / "inventory_v1.json").write_bytes(client.get("/versions/1/inventory").content)
        (OUT / "inventory_v2.json").write_bytes(client.get("/versions/2/inventory").content)
        (OUT / "mesh_v1.vmesh").write_bytes(client.get("/versions/1/mesh").content)
        (OUT / "mesh_v2.vmesh").write_bytes(client.get("/versions/2/mesh").content)
        query_text = objects[2]["class_name"]
        (OUT / "query_v2.json").write_bytes(
            client.post("/versions/2/query", json={"text": query_text}).content
        )
        (OUT / "diff_1_2.json").write_bytes(client.get("/diff?prev=1&curr=2&seed=0").content)
        (OUT / "meta.json").write_text(json.dumps({
            "query_text": query_text,
            "expected_missing": truth["expected_missing"],
            "expected_unchanged": truth["expected_unchanged"],
            "renamed_segment": objects[0]["segment_id"],
        }, indent=1))
    print(f"fixtures written to {OUT}")
    for p in sorted(OUT.iterdir()):
        print(f"  {p.name}: {p.stat().st_size} bytes")


if __name__ == "__main__":
    sys.exit(main())
