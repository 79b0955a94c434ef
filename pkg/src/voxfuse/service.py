"""HTTP face of the scene manager.

Endpoints (JSON unless noted):
    GET  /scenes
    GET  /scenes/{scene_id}/versions
    GET  /versions/{v}/mesh                  binary .vmesh
    GET  /versions/{v}/inventory
    POST /versions/{v}/query                 {text, top_k?, temperature?, format?}
    POST /versions/{v}/actions               {action: merge|rename|remember, ...}
    POST /versions/{v}/train                 {seed?, cooldown?, epoch_cap?, ...}
    GET  /jobs/{job_id}
    GET  /diff?prev=&curr=&seed=

Errors use {code, message}; malformed requests get 4xx, internal failures 5xx.
"""

from __future__ import annotations

import threading
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import __version__
from .actions import apply_merge, apply_remember, apply_rename
from .diff import diff_versions
from .errors import StoreError, VoxfuseError
from .insitu.training import TrainConfig, fit_inventory
from .meshing import export_mesh
from .query import build_negative_set, embed_query, normalize_heat, rank_segments, score_vertices
from .store import SceneStore


class AppError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class QueryBody(BaseModel):
    text: str
    top_k: int = 10
    temperature: float = 0.07
    format: str = "json"  # json | vmesh


class ActionBody(BaseModel):
    action: str
    segment_ids: Optional[list[int]] = None
    segment_id: Optional[int] = None
    name: Optional[str] = None


class TrainBody(BaseModel):
    seed: int = 0
    cooldown: int = 10
    epoch_cap: int = 500
    accuracy_floor: float = 0.95
    lr: float = 1e-3


class JobRegistry:
    def __init__(self):
        self._lock = threading.Lock()
        self._jobs: dict[int, dict] = {}
        self._next = 1
        self._active_scenes: set[str] = set()

    def start(self, scene_id: str) -> int:
        with self._lock:
            if scene_id in self._active_scenes:
                raise AppError(409, "training_busy",
                               f"scene '{scene_id}' already has a training job running")
            self._active_scenes.add(scene_id)
            job_id = self._next
            self._next += 1
            self._jobs[job_id] = {
                "job_id": job_id, "scene_id": scene_id, "status": "running",
                "epoch": 0, "accuracy": 0.0, "best_accuracy": 0.0,
            }
            return job_id

    def update(self, job_id: int, **fields):
        with self._lock:
            self._jobs[job_id].update(fields)

    def finish(self, job_id: int, **fields):
        with self._lock:
            job = self._jobs[job_id]
            job.update(fields)
            self._active_scenes.discard(job["scene_id"])

    def get(self, job_id: int) -> dict:
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                raise AppError(404, "unknown_job", f"no job {job_id}")
            return dict(job)


def create_app(store: SceneStore) -> FastAPI:
    app = FastAPI(title="voxfuse scene manager", version=__version__)
    from fastapi.middleware.cors import CORSMiddleware

    # the browser companion is served from a different origin
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    jobs = JobRegistry()
    scene_locks: dict[str, threading.Lock] = {}
    locks_guard = threading.Lock()

    def scene_lock(scene_id: str) -> threading.Lock:
        with locks_guard:
            return scene_locks.setdefault(scene_id, threading.Lock())

    def get_version(v: int):
        try:
            return store.version(v)
        except StoreError as exc:
            raise AppError(404, "unknown_version", str(exc))

    @app.exception_handler(AppError)
    async def app_error_handler(request: Request, exc: AppError):
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.code, "message": exc.message})

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=422,
                            content={"code": "invalid_request", "message": str(exc.errors())})

    @app.exception_handler(Exception)
    async def internal_handler(request: Request, exc: Exception):
        return JSONResponse(status_code=500,
                            content={"code": "internal", "message": f"{type(exc).__name__}: {exc}"})

    @app.get("/scenes")
    def list_scenes():
        return {"scenes": store.scenes()}

    @app.get("/scenes/{scene_id}/versions")
    def list_versions(scene_id: str):
        versions = store.versions(scene_id)
        if not versions:
            raise AppError(404, "unknown_scene", f"no versions for scene '{scene_id}'")
        return {
            "scene_id": scene_id,
            "versions": [
                {
                    "version_id": v.version_id,
                    "timestamp": v.timestamp,
                    "content_hash": v.content_hash,
                    "has_volume": v.volume_ref is not None,
                    "has_model": v.model_ref is not None,
                }
                for v in versions
            ],
        }

    @app.get("/versions/{v}/mesh")
    def get_mesh(v: int):
        version = get_version(v)
        return Response(content=version.mesh_bytes(), media_type="application/octet-stream")

    @app.get("/versions/{v}/inventory")
    def get_inventory(v: int):
        version = get_version(v)
        inv = version.load_inventory()
        return {
            "version_id": v,
            "class_names": inv.class_names,
            "segments": [
                {
                    "segment_id": s.segment_id,
                    "class_id": s.class_id,
                    "class_name": inv.class_names[s.class_id],
                    "auto_name": s.auto_name,
                    "user_name": s.user_name,
                    "label": s.label,
                    "remembered": s.remembered,
                    "centroid": [float(x) for x in s.centroid],
                    "voxel_count": s.voxel_count,
                }
                for s in inv.segments
            ],
        }

    @app.post("/versions/{v}/query")
    def query_version(v: int, body: QueryBody):
        if not body.text.strip():
            raise AppError(400, "empty_query", "query text must be non-empty")
        if body.temperature <= 0:
            raise AppError(400, "bad_temperature", "temperature must be positive")
        version = get_version(v)
        mesh = version.load_mesh()
        if mesh.vertex_feats is None or not len(mesh.vertex_feats):
            raise AppError(409, "no_features", "version mesh has no vertex features")
        inv = version.load_inventory()
        embedder = version.embedder(inv.grid.feature_dim)
        q = embed_query(embedder, body.text)
        negatives = build_negative_set(inv, embedder)
        heat = score_vertices(mesh, q, negatives, temperature=body.temperature)
        display = normalize_heat(heat)
        ranked = rank_segments(mesh, heat, inv, top_k=body.top_k)
        if body.format == "vmesh":
            mesh.vertex_heat = display.astype(np.float32)
            import tempfile
            from pathlib import Path
            with tempfile.TemporaryDirectory() as td:
                p = Path(td) / "heat.vmesh"
                export_mesh(mesh, p)
                return Response(content=p.read_bytes(),
                                media_type="application/octet-stream")
        return {
            "version_id": v,
            "text": body.text,
            "temperature": body.temperature,
            "ranked": ranked,
            "heat": [round(float(h), 6) for h in display],
        }

    @app.post("/versions/{v}/actions")
    def post_action(v: int, body: ActionBody):
        version = get_version(v)
        with scene_lock(version.scene_id):
            inv = version.load_inventory()
            try:
                if body.action == "merge":
                    if not body.segment_ids or body.name is None:
                        raise AppError(400, "bad_action", "merge needs segment_ids and name")
                    apply_merge(inv, body.segment_ids, body.name)
                elif body.action == "rename":
                    if body.segment_id is None or body.name is None:
                        raise AppError(400, "bad_action", "rename needs segment_id and name")
                    apply_rename(inv, body.segment_id, body.name)
                elif body.action == "remember":
                    if body.segment_id is None:
                        raise AppError(400, "bad_action", "remember needs segment_id")
                    apply_remember(inv, body.segment_id)
                else:
                    raise AppError(400, "bad_action", f"unknown action '{body.action}'")
            except KeyError as exc:
                raise AppError(404, "unknown_segment", str(exc.args[0]))
            except ValueError as exc:
                raise AppError(400, "bad_action", str(exc))
            store.update_inventory(version, inv)
        return get_inventory(v)

    @app.post("/versions/{v}/train")
    def post_train(v: int, body: TrainBody):
        version = get_version(v)
        if version.volume_ref is None:
            raise AppError(409, "no_volume",
                           "version was committed without a volume; cannot train")
        inv = version.load_inventory()
        if not inv.personalized():
            raise AppError(409, "nothing_personalized",
                           "merge, rename, or remember at least one segment first")
        volume = version.load_volume()
        job_id = jobs.start(version.scene_id)

        config = TrainConfig(lr=body.lr, cooldown=body.cooldown,
                             epoch_cap=body.epoch_cap, accuracy_floor=body.accuracy_floor)

        def progress(epoch, acc, best):
            jobs.update(job_id, epoch=epoch, accuracy=acc, best_accuracy=best)

        def run():
            try:
                model, report = fit_inventory(inv, volume, config,
                                              seed=body.seed, progress=progress)
                with scene_lock(version.scene_id):
                    store.update_inventory(version, inv)  # insitu_class assignments
                    store.attach_model(version, model, report)
                jobs.finish(job_id, status="done",
                            best_accuracy=report.best_accuracy,
                            epochs_run=report.epochs_run,
                            stopped_reason=report.stopped_reason)
            except Exception as exc:  # surfaced via job status, not a crash
                jobs.finish(job_id, status="failed", error=f"{type(exc).__name__}: {exc}")

        threading.Thread(target=run, name=f"train-job-{job_id}", daemon=True).start()
        return {"job_id": job_id}

    @app.get("/jobs/{job_id}")
    def get_job(job_id: int):
        return jobs.get(job_id)

    @app.get("/diff")
    def get_diff(prev: int, curr: int, seed: int = 0, votes: int = 16):
        prev_v = get_version(prev)
        curr_v = get_version(curr)
        if not prev_v.load_inventory().personalized():
            return {"prev_version": prev, "curr_version": curr,
                    "unchanged": [], "missing": []}
        try:
            model = prev_v.load_model()
        except StoreError as exc:
            raise AppError(409, "no_model", str(exc))
        try:
            report = diff_versions(model, prev_v, curr_v,
                                   rng=np.random.default_rng(seed), votes=votes)
        except ValueError as exc:
            raise AppError(409, "diff_failed", str(exc))
        return report.to_dict()

    return app


def serve(store: SceneStore, host: str = "127.0.0.1", port: int = 8754):
    """Blocking uvicorn runner used by the CLI."""
    import uvicorn

    uvicorn.run(create_app(store), host=host, port=port, log_level="warning")
