"""Stateful HTTP facade over the renderers.

Endpoints (JSON bodies except frame payloads, which are raw PPM bytes):

    POST /api/scene    {dataset, lod?, trace?}        -> {id, gaussians}
    GET  /api/frame    ?scene&cam&tf&renderer&w&h     -> PPM bytes
    GET  /api/stats    ?scene                          -> counters
    POST /api/compare  {scene, cam?, tf?, w?, h?}      -> {psnr_db}

One scene slot is live at a time: a successful POST /api/scene atomically
replaces the previous scene, and a build already in progress answers 409.
Frame requests capture an immutable scene snapshot, so any number may run
concurrently with each other and with a rebuild.

Dataset references: a registered name, a path to an .svol/.xyz file under
the data directory, or "synth:<kind>:<dims>[:key=value,...]".
"""

from __future__ import annotations

import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Query, Response
from pydantic import BaseModel

from .camera import MalformedCameraError, frame_scene, parse_wire
from .compare import GAUSS_LATTICE_SCALE
from .fitting import GaussianModel, LodConfig, fit_grid, fit_points
from .grid import SparseGrid
from .imaging import Film, builtin_tf, psnr, tonemap_8bit, write_ppm
from .ingest import build_point_grid, gen_synthetic, parse_xyz, read_svol
from .reference import MarchConfig, render_reference
from .tracer import Bvh, TraceConfig, TraceStats, build_bvh, render

import io


class LodParams(BaseModel):
    lod: int | None = None
    dense_block: int | None = None
    sparse_strategy: str | None = None
    opacity_threshold: float | None = None
    sigma_multiplier: int = 2

    def to_config(self) -> LodConfig:
        base = LodConfig.from_lod(self.lod) if self.lod else LodConfig()
        return LodConfig(
            dense_block=self.dense_block or base.dense_block,
            sparse_strategy=self.sparse_strategy or base.sparse_strategy,
            opacity_threshold=self.opacity_threshold or base.opacity_threshold,
            sigma_multiplier=self.sigma_multiplier,
        )


class TraceParams(BaseModel):
    kappa: float = 0.01
    early_exit_high: float = 0.999
    max_hits_per_ray: int = 4096
    paper_low_break: bool = False

    def to_config(self) -> TraceConfig:
        return TraceConfig(self.kappa, self.early_exit_high,
                           self.max_hits_per_ray, self.paper_low_break)


class SceneRequest(BaseModel):
    dataset: str
    lod: LodParams = LodParams()
    trace: TraceParams = TraceParams()


class CompareRequest(BaseModel):
    scene: str
    cam: str | None = None
    tf: str = "gray"
    w: int = 256
    h: int = 256


@dataclass
class Scene:
    scene_id: str
    grid: SparseGrid
    model: GaussianModel
    bvh: Bvh
    trace: TraceConfig
    stats: TraceStats = field(default_factory=TraceStats)
    subframes: int = 0
    last_frame_ms: float = 0.0


def _load_dataset(ref: str, data_dir: Path | None) -> SparseGrid | tuple:
    if ref.startswith("synth:"):
        parts = ref.split(":")
        if len(parts) < 3:
            raise KeyError(ref)
        kind, dims = parts[1], int(parts[2])
        params = {}
        if len(parts) > 3:
            for pair in parts[3].split(","):
                key, _, value = pair.partition("=")
                params[key] = float(value)
        return gen_synthetic(kind, dims, params)
    path = Path(ref)
    if not path.is_absolute() and data_dir is not None:
        path = data_dir / path
    if path.suffix == ".svol" and path.exists():
        with open(path, "rb") as f:
            return read_svol(f)
    if path.suffix == ".xyz" and path.exists():
        with open(path, "r", encoding="utf-8") as f:
            return ("points", parse_xyz(f), path.name)
    raise KeyError(ref)


def create_app(data_dir: str | Path | None = None,
               render_concurrency: int | None = None) -> FastAPI:
    app = FastAPI(title="gaussvol render service")
    state = app.state
    state.data_dir = Path(data_dir) if data_dir else None
    state.datasets = {}          # name -> callable returning grid/points
    state.scene: Scene | None = None
    state.scene_lock = threading.Lock()   # guards the slot swap
    state.build_lock = threading.Lock()   # exclusive rebuild
    state.render_slots = threading.Semaphore(
        render_concurrency or os.cpu_count() or 4)
    state.builds = 0
    state.next_id = 1

    def current_scene(scene_id: str) -> Scene:
        scene = state.scene
        if scene is None or scene.scene_id != scene_id:
            raise HTTPException(status_code=404, detail="unknown scene")
        return scene

    @app.post("/api/scene")
    def post_scene(req: SceneRequest):
        try:
            lod_cfg = req.lod.to_config()
            trace_cfg = req.trace.to_config()
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        if not state.build_lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="rebuild in progress")
        try:
            loader = state.datasets.get(req.dataset)
            try:
                data = loader() if loader else _load_dataset(req.dataset, state.data_dir)
            except KeyError:
                raise HTTPException(status_code=404,
                                    detail=f"unknown dataset {req.dataset!r}") from None
            if isinstance(data, tuple) and data[0] == "points":
                pg = build_point_grid(data[1], name=data[2])
                grid, model = pg.grid, fit_points(pg, lod_cfg)
            else:
                grid, model = data, fit_grid(data, lod_cfg)
            scene = Scene(
                scene_id=f"s{state.next_id}",
                grid=grid,
                model=model,
                bvh=build_bvh(model),
                trace=trace_cfg,
            )
            state.next_id += 1
            state.builds += 1
            with state.scene_lock:
                state.scene = scene  # atomic slot swap
            return {"id": scene.scene_id, "gaussians": len(scene.model),
                    "scene_aabb": [float(v) for v in scene.model.scene_aabb]}
        finally:
            state.build_lock.release()

    @app.get("/api/frame")
    def get_frame(scene: str, cam: str | None = None, tf: str = "gray",
                  renderer: str = Query("gauss", pattern="^(gauss|ref)$"),
                  w: int = 256, h: int = 256):
        snap = current_scene(scene)
        try:
            camera = parse_wire(cam) if cam else frame_scene(snap.model.scene_aabb)
            transfer = builtin_tf(tf)
        except (MalformedCameraError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        film = Film(w, h)
        t0 = time.perf_counter()
        with state.render_slots:
            if renderer == "ref":
                render_reference(snap.grid, camera, film, transfer,
                                 MarchConfig(density_scale=GAUSS_LATTICE_SCALE))
            else:
                render(snap.model, snap.bvh, camera, film, transfer, snap.trace,
                       stats=snap.stats)
        snap.last_frame_ms = (time.perf_counter() - t0) * 1e3
        snap.subframes += film.subframes
        buf = io.BytesIO()
        write_ppm(tonemap_8bit(film), buf)
        return Response(content=buf.getvalue(),
                        media_type="application/octet-stream")

    @app.get("/api/stats")
    def get_stats(scene: str | None = None):
        snap = state.scene if scene is None else current_scene(scene)
        if snap is None:
            raise HTTPException(status_code=404, detail="no scene loaded")
        return {
            "gaussians": len(snap.model),
            "last_frame_ms": snap.last_frame_ms,
            "hit_buffer_overflows": snap.stats.hit_buffer_overflows,
            "subframes": snap.subframes,
            "builds": state.builds,
        }

    @app.post("/api/compare")
    def post_compare(req: CompareRequest):
        snap = current_scene(req.scene)
        try:
            camera = parse_wire(req.cam) if req.cam else frame_scene(snap.model.scene_aabb)
            transfer = builtin_tf(req.tf)
        except (MalformedCameraError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        with state.render_slots:
            gauss_film = Film(req.w, req.h)
            render(snap.model, snap.bvh, camera, gauss_film, transfer, snap.trace,
                   stats=snap.stats)
            ref_film = Film(req.w, req.h)
            render_reference(snap.grid, camera, ref_film, transfer,
                             MarchConfig(density_scale=GAUSS_LATTICE_SCALE))
        value = psnr(tonemap_8bit(gauss_film), tonemap_8bit(ref_film))
        return {"psnr_db": None if value == float("inf") else value,
                "gaussians": len(snap.model)}

    return app


def main(argv=None) -> int:
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(prog="gaussvol-service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8077)
    parser.add_argument("--data-dir", default=None)
    args = parser.parse_args(argv)
    uvicorn.run(create_app(args.data_dir), host=args.host, port=args.port,
                log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
