#!/usr/bin/env python3
"""Runtime transfer-function swapping: one model, three colorings.

The model is fitted once; only the post-accumulation color mapping
changes between frames, so no refit or BVH rebuild happens.
"""

import time

from gaussvol.camera import frame_scene
from gaussvol.fitting import LodConfig, fit_grid
from gaussvol.imaging import Film, builtin_tf, tonemap_8bit, write_ppm
from gaussvol.ingest import gen_synthetic
from gaussvol.tracer import TraceConfig, build_bvh, render

grid = gen_synthetic("sphere_shell", 64, {"radius": 22.0, "thickness": 4.0,
                                          "value": 0.08})
t0 = time.perf_counter()
model = fit_grid(grid, LodConfig.from_lod(1))
bvh = build_bvh(model)
print(f"fitted {len(model)} gaussians once in {time.perf_counter() - t0:.2f}s")

camera = frame_scene(model.scene_aabb)
for name in ("gray", "jet", "bluewhite"):
    film = Film(256, 256)
    t0 = time.perf_counter()
    render(model, bvh, camera, film, builtin_tf(name), TraceConfig())
    out = f"shell_{name}.ppm"
    with open(out, "wb") as sink:
        write_ppm(tonemap_8bit(film), sink)
    print(f"{out}: {1e3 * (time.perf_counter() - t0):.0f} ms, no refit")
