#!/usr/bin/env python3
"""How the box multiplier (sigma) and density cutoff (kappa) shape tracing.

sigma scales every gaussian's bounding box: larger boxes mean more
candidate intersections per ray (slower) but less support truncation.
kappa sets the density level treated as the support boundary: smaller
values widen the analytic hit interval of each gaussian.
"""

import numpy as np

from gaussvol.camera import frame_scene
from gaussvol.fitting import LodConfig, fit_grid, with_sigma
from gaussvol.imaging import Film, tf_grayscale
from gaussvol.ingest import gen_synthetic
from gaussvol.tracer import Ray, TraceConfig, TraceStats, build_bvh, intersect_ray_gaussian, render

grid = gen_synthetic("gaussian_blob", 48, {"sigma": 12.0, "peak": 0.05,
                                           "threshold": 0.002})
base = fit_grid(grid, LodConfig.from_lod(2, sigma_multiplier=1))
camera = frame_scene(base.scene_aabb)

print("sigma  candidates  accepted")
for sigma in (1, 2, 3):
    model = with_sigma(base, sigma)
    stats = TraceStats()
    film = Film(160, 160)
    render(model, build_bvh(model), camera, film, tf_grayscale(), TraceConfig(),
           stats=stats)
    print(f"{sigma:5d}  {stats.candidates:10d}  {stats.accepted_hits:8d}")

g = base.gaussian(len(base) // 2)
ray = Ray(np.asarray(g.center) - (20.0, 0.0, 0.0), (1.0, 0.0, 0.0))
print("\nkappa    hit interval through one gaussian")
for kappa in (0.1, 0.01, 0.001):
    hit = intersect_ray_gaussian(ray, g, kappa)
    print(f"{kappa:<7g}  [{hit.t_entry:.4f}, {hit.t_exit:.4f}] "
          f"(width {hit.t_exit - hit.t_entry:.4f})")
