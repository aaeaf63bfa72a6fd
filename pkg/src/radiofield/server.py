"""HTTP prediction service over a loaded checkpoint.

Endpoints: GET /health, GET /scene, POST /predict.  Requests are served from
an immutable snapshot (predictor + hashes); an administrative reload builds a
fresh snapshot and swaps it atomically, answering 503 while the swap is in
progress so no response ever mixes two models.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .checkpoint import file_hash
from .errors import ValidationError
from .geometry import Box, Triangle
from .model import Predictor
from .training import predictor_from_checkpoint

MIN_RESOLUTION = 8
MAX_RESOLUTION = 512


@dataclass(frozen=True)
class Snapshot:
    predictor: Predictor
    model_hash: str
    scene_hash: str
    checkpoint_path: str


class ServerState:
    """One immutable snapshot, many readers; reload swaps it atomically."""

    def __init__(self, snapshot: Snapshot):
        self._snapshot = snapshot
        self._reload_lock = threading.Lock()
        self._swapping = False

    @property
    def swapping(self) -> bool:
        return self._swapping

    def snapshot(self) -> Snapshot:
        return self._snapshot

    def reload(self, checkpoint_path) -> Snapshot:
        """Load a new checkpoint and swap it in.  /predict answers 503 while
        the replacement snapshot is being built."""
        with self._reload_lock:
            self._swapping = True
            try:
                snap = _load_snapshot(checkpoint_path)
                self._snapshot = snap
            finally:
                self._swapping = False
        return self._snapshot


def _load_snapshot(checkpoint_path) -> Snapshot:
    predictor, header = predictor_from_checkpoint(checkpoint_path)
    return Snapshot(
        predictor=predictor,
        model_hash=file_hash(checkpoint_path),
        scene_hash=header["scene_hash"],
        checkpoint_path=str(checkpoint_path),
    )


def build_state(checkpoint_path) -> ServerState:
    return ServerState(_load_snapshot(checkpoint_path))


class _FieldError(Exception):
    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field


def _validate_predict(body: dict, predictor: Predictor):
    if not isinstance(body, dict):
        raise _FieldError("body", "request body must be a JSON object")

    tx = body.get("tx")
    if (not isinstance(tx, (list, tuple)) or len(tx) != 3
            or not all(isinstance(v, (int, float)) for v in tx)):
        raise _FieldError("tx", "tx must be [x, y, z] in meters")
    tx = np.array(tx, dtype=np.float64)
    lo, hi = predictor.scene.bounds_min, predictor.scene.bounds_max
    if np.any(tx < lo - 1e-9) or np.any(tx > hi + 1e-9):
        raise _FieldError("tx", f"tx {tx.tolist()} outside scene bounds")

    pattern_id = body.get("pattern_id")
    if not isinstance(pattern_id, int) or isinstance(pattern_id, bool) \
            or not (0 <= pattern_id <= 3):
        raise _FieldError("pattern_id", "pattern_id must be an integer in [0, 3]")

    height = body.get("height")
    if not isinstance(height, (int, float)) or not (lo[2] - 1e-9 <= height <= hi[2] + 1e-9):
        raise _FieldError("height", f"height must lie within [{lo[2]}, {hi[2]}] meters")

    resolution = body.get("resolution")
    if not isinstance(resolution, int) or isinstance(resolution, bool) \
            or not (MIN_RESOLUTION <= resolution <= MAX_RESOLUTION):
        raise _FieldError("resolution",
                          f"resolution must be an integer in [{MIN_RESOLUTION}, {MAX_RESOLUTION}]")

    queries = body.get("point_queries")
    if queries is not None:
        if (not isinstance(queries, list)
                or not all(isinstance(q, (list, tuple)) and len(q) == 3
                           and all(isinstance(v, (int, float)) for v in q)
                           for q in queries)):
            raise _FieldError("point_queries", "point_queries must be a list of [x, y, z]")
        queries = np.array(queries, dtype=np.float64)
    return tx, pattern_id, float(height), resolution, queries


def _scene_outline(predictor: Predictor) -> dict:
    footprints = []
    for prim in predictor.scene.primitives:
        if isinstance(prim, Box):
            lo, hi = prim.aabb()
            footprints.append({
                "type": "box",
                "xy": [[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]],
                "z": [lo[2], hi[2]],
            })
        elif isinstance(prim, Triangle):
            footprints.append({
                "type": "triangle",
                "xy": [[v[0], v[1]] for v in (prim.v0, prim.v1, prim.v2)],
                "z": [min(v[2] for v in (prim.v0, prim.v1, prim.v2)),
                      max(v[2] for v in (prim.v0, prim.v1, prim.v2))],
            })
    return {
        "bounds": {"min": predictor.scene.bounds_min.tolist(),
                   "max": predictor.scene.bounds_max.tolist()},
        "footprints": footprints,
        "probes": predictor.scene.to_world(predictor.probes).tolist(),
    }


def create_app(state: ServerState) -> FastAPI:
    app = FastAPI(title="radiofield predict server")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    app.state.server_state = state

    @app.get("/health")
    def health():
        snap = state.snapshot()
        p = snap.predictor
        return {
            "status": "ok",
            "model_hash": snap.model_hash,
            "scene_hash": snap.scene_hash,
            "p_min_db": p.p_min_db,
            "p_max_db": p.p_max_db,
            "bounds": {"min": p.scene.bounds_min.tolist(),
                       "max": p.scene.bounds_max.tolist()},
        }

    @app.get("/scene")
    def scene():
        return _scene_outline(state.snapshot().predictor)

    @app.post("/predict")
    async def predict(request: Request):
        if state.swapping:
            return JSONResponse(status_code=503,
                                content={"error": "checkpoint swap in progress"})
        snap = state.snapshot()  # pin one model for the whole request
        try:
            body = await request.json()
        except Exception:
            return JSONResponse(status_code=400,
                                content={"error": "invalid JSON body", "field": "body"})
        try:
            tx, pattern_id, height, resolution, queries = _validate_predict(
                body, snap.predictor)
        except _FieldError as exc:
            return JSONResponse(status_code=400,
                                content={"error": str(exc), "field": exc.field})
        t0 = time.perf_counter()
        try:
            values = snap.predictor.coverage_map(tx, pattern_id, height, resolution)
            point_results = []
            if queries is not None and len(queries):
                p_norm = snap.predictor.predict_points(tx, pattern_id, queries)
                p_db = snap.predictor.to_db(p_norm)
                point_results = [
                    {"position": q.tolist(), "p_norm": float(n), "p_db": float(d)}
                    for q, n, d in zip(queries, p_norm, p_db)
                ]
        except ValidationError as exc:
            return JSONResponse(status_code=400,
                                content={"error": str(exc), "field": "request"})
        return {
            "bounds": {"min": snap.predictor.scene.bounds_min.tolist(),
                       "max": snap.predictor.scene.bounds_max.tolist()},
            "resolution": resolution,
            "p_min_db": snap.predictor.p_min_db,
            "p_max_db": snap.predictor.p_max_db,
            "values_norm": values.ravel().tolist(),
            "point_results": point_results,
            "elapsed_ms": (time.perf_counter() - t0) * 1000.0,
        }

    return app
