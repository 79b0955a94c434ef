import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from voxfuse.meshing import VMESH_MAGIC, import_mesh
from voxfuse.pipeline import fuse_frames
from voxfuse.service import create_app
from voxfuse.store import SceneStore
from voxfuse.synthkit import build_scene, two_scan_fixture

VIEWS = 14
RENDER_KW = dict(image_size=(120, 90), patch_size=8, stride=4)


@pytest.fixture(scope="module")
def rig(tmp_path_factory):
    root = tmp_path_factory.mktemp("svc")
    rng = np.random.default_rng(0)
    scene = build_scene(3, rng, feature_dim=16, noise_sigma=0.05)
    truth = two_scan_fixture(scene, root / "fixture", remove=1, rng=rng,
                             n_views=VIEWS, **RENDER_KW)
    store = SceneStore.create(root / "store")
    v1 = store.commit_version(
        "office",
        *_fused(root / "fixture" / "scan_a"),
        embeddings_path=root / "fixture" / "scan_a" / "text_embeddings.vle",
    )
    v2 = store.commit_version(
        "office",
        *_fused(root / "fixture" / "scan_b"),
        embeddings_path=root / "fixture" / "scan_b" / "text_embeddings.vle",
    )
    client = TestClient(create_app(store), raise_server_exceptions=False)
    return {"client": client, "store": store, "truth": truth, "v1": v1, "v2": v2}


def _fused(frames_dir):
    res = fuse_frames(frames_dir, voxel_size=0.05)
    return res.inventory, res.mesh, res.volume


def object_segments(client, v):
    inv = client.get(f"/versions/{v}/inventory").json()
    return [s for s in inv["segments"] if s["class_name"] != "floor"]


class TestReads:
    def test_scenes_listing_reports_size(self, rig):
        r = rig["client"].get("/scenes")
        assert r.status_code == 200
        scenes = {s["scene_id"]: s for s in r.json()["scenes"]}
        assert scenes["office"]["num_versions"] == 2
        assert scenes["office"]["size_bytes"] > 0

    def test_version_listing(self, rig):
        r = rig["client"].get("/scenes/office/versions")
        assert r.status_code == 200
        versions = r.json()["versions"]
        assert [v["version_id"] for v in versions] == [rig["v1"], rig["v2"]]
        assert all(v["has_volume"] for v in versions)

    def test_unknown_scene_404(self, rig):
        r = rig["client"].get("/scenes/nowhere/versions")
        assert r.status_code == 404
        assert set(r.json()) == {"code", "message"}

    def test_mesh_is_binary_vmesh(self, rig):
        r = rig["client"].get(f"/versions/{rig['v1']}/mesh")
        assert r.status_code == 200
        assert r.content[:4] == VMESH_MAGIC

    def test_inventory_lists_objects(self, rig):
        objs = object_segments(rig["client"], rig["v1"])
        assert len(objs) == 3
        names = {o["class_name"] for o in objs}
        assert names == set(rig["truth"]["expected_unchanged"]) | set(
            rig["truth"]["expected_missing"]
        )

    def test_unknown_version_404(self, rig):
        r = rig["client"].get("/versions/999/inventory")
        assert r.status_code == 404
        assert r.json()["code"] == "unknown_version"


class TestQuery:
    def test_query_ranks_target_object_first(self, rig):
        objs = object_segments(rig["client"], rig["v1"])
        target = objs[0]["class_name"]
        r = rig["client"].post(f"/versions/{rig['v1']}/query",
                               json={"text": target, "top_k": 5})
        assert r.status_code == 200
        body = r.json()
        assert body["ranked"][0]["class"] == target
        assert len(body["heat"]) > 0
        assert all(0.0 <= h <= 1.0 for h in body["heat"])

    def test_query_vmesh_format_carries_heat(self, rig, tmp_path):
        objs = object_segments(rig["client"], rig["v1"])
        r = rig["client"].post(
            f"/versions/{rig['v1']}/query",
            json={"text": objs[0]["class_name"], "format": "vmesh"},
        )
        assert r.status_code == 200
        p = tmp_path / "heat.vmesh"
        p.write_bytes(r.content)
        mesh = import_mesh(p)
        assert mesh.vertex_heat is not None
        assert len(mesh.vertex_heat) == mesh.num_vertices

    def test_empty_query_400(self, rig):
        r = rig["client"].post(f"/versions/{rig['v1']}/query", json={"text": "  "})
        assert r.status_code == 400

    def test_malformed_body_422_then_service_alive(self, rig):
        r = rig["client"].post(f"/versions/{rig['v1']}/query",
                               content=b"{not json", headers={"Content-Type": "application/json"})
        assert r.status_code == 422
        assert r.json()["code"] == "invalid_request"
        assert rig["client"].get("/scenes").status_code == 200


class TestActionsTrainDiff:
    def test_full_inventory_flow(self, rig):
        client = rig["client"]
        v1, v2 = rig["v1"], rig["v2"]

        # rename one object Joe's-thermos style, remember the rest
        objs = object_segments(client, v1)
        renamed_class = objs[0]["class_name"]
        r = client.post(f"/versions/{v1}/actions",
                        json={"action": "rename",
                              "segment_id": objs[0]["segment_id"],
                              "name": "Joe's thermos"})
        assert r.status_code == 200
        for o in objs[1:]:
            r = client.post(f"/versions/{v1}/actions",
                            json={"action": "remember", "segment_id": o["segment_id"]})
            assert r.status_code == 200
        inv = client.get(f"/versions/{v1}/inventory").json()
        by_id = {s["segment_id"]: s for s in inv["segments"]}
        assert by_id[objs[0]["segment_id"]]["label"] == "Joe's thermos"
        assert by_id[objs[0]["segment_id"]]["remembered"]

        # launch training and poll the job to completion
        r = client.post(f"/versions/{v1}/train", json={"seed": 0})
        assert r.status_code == 200
        job_id = r.json()["job_id"]
        deadline = time.time() + 120
        status = None
        while time.time() < deadline:
            status = client.get(f"/jobs/{job_id}").json()
            if status["status"] != "running":
                break
            time.sleep(0.3)
        assert status["status"] == "done", status
        assert status["best_accuracy"] >= 0.95
        assert client.get(f"/scenes/office/versions").json()["versions"][0]["has_model"]

        # diff against the scan with one object removed
        r = client.get(f"/diff?prev={v1}&curr={v2}&seed=0")
        assert r.status_code == 200, r.json()
        report = r.json()
        missing_class = rig["truth"]["expected_missing"][0]
        missing_labels = {m["label"] for m in report["missing"]}
        expected_missing = (
            "Joe's thermos" if missing_class == renamed_class
            else f"{missing_class}:1"
        )
        assert missing_labels == {expected_missing}
        assert len(report["unchanged"]) == 2

    def test_action_validation(self, rig):
        client, v1 = rig["client"], rig["v1"]
        r = client.post(f"/versions/{v1}/actions",
                        json={"action": "rename", "segment_id": 4242, "name": "x"})
        assert r.status_code == 404
        assert r.json()["code"] == "unknown_segment"
        r = client.post(f"/versions/{v1}/actions",
                        json={"action": "merge", "segment_ids": [1], "name": "x"})
        assert r.status_code == 400
        r = client.post(f"/versions/{v1}/actions", json={"action": "explode"})
        assert r.status_code == 400

    def test_train_requires_personalization(self, rig):
        r = rig["client"].post(f"/versions/{rig['v2']}/train", json={})
        assert r.status_code == 409
        assert r.json()["code"] == "nothing_personalized"

    def test_diff_without_model_409(self, rig):
        client = rig["client"]
        # v2 has no personalization at all: vacuous empty diff
        r = client.get(f"/diff?prev={rig['v2']}&curr={rig['v1']}")
        assert r.status_code == 200
        assert r.json() == {"prev_version": rig["v2"], "curr_version": rig["v1"],
                            "unchanged": [], "missing": []}

    def test_unknown_job_404(self, rig):
        r = rig["client"].get("/jobs/31337")
        assert r.status_code == 404


def test_live_socket_smoke(rig):
    """The uvicorn serve path answers over a real TCP socket."""
    import socket
    import threading

    import httpx
    import uvicorn

    from voxfuse.service import create_app

    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    config = uvicorn.Config(create_app(rig["store"]), host="127.0.0.1", port=port,
                            log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    try:
        deadline = time.time() + 15
        while not server.started and time.time() < deadline:
            time.sleep(0.05)
        assert server.started
        r = httpx.get(f"http://127.0.0.1:{port}/scenes", timeout=10)
        assert r.status_code == 200
        assert r.json()["scenes"][0]["scene_id"] == "office"
    finally:
        server.should_exit = True
        thread.join(timeout=10)
