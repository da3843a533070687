#!/usr/bin/env python3
"""Particle rendering: .xyz text -> point grid -> isotropic gaussians.

Synthesizes a small spiral-galaxy-like cloud, writes it in the plain
x y z vx vy vz format, then runs the full ingestion path: parsing,
one-particle-per-voxel sizing, speed-as-opacity fitting, rendering.
"""

import io

import numpy as np

from gaussvol.camera import frame_scene
from gaussvol.fitting import LodConfig, fit_points
from gaussvol.imaging import Film, tf_bluewhite, tonemap_8bit, write_ppm
from gaussvol.ingest import build_point_grid, parse_xyz
from gaussvol.tracer import TraceConfig, build_bvh, render

rng = np.random.default_rng(8)
n = 30_000
theta = rng.uniform(0, 6 * np.pi, n)
radius = theta / (6 * np.pi) * 20.0 + rng.normal(0, 0.6, n)
pos = np.stack([radius * np.cos(theta),
                rng.normal(0, 1.2, n) * np.exp(-radius / 12.0),
                radius * np.sin(theta)], axis=1)
vel = np.stack([-np.sin(theta), 0.1 * rng.standard_normal(n), np.cos(theta)],
               axis=1) * (1.0 + radius[:, None] / 4.0)

text = io.StringIO()
for p, v in zip(pos, vel):
    text.write(f"{p[0]:.5f} {p[1]:.5f} {p[2]:.5f} {v[0]:.5f} {v[1]:.5f} {v[2]:.5f}\n")
text.seek(0)

points = parse_xyz(text)
pg = build_point_grid(points, name="spiral")
print(f"{len(points)} particles, voxel size {pg.voxel_size:.3f} "
      f"(~{len(points) / len(pg.buckets):.2f} particles per occupied voxel)")

model = fit_points(pg, LodConfig())
print(f"{len(model)} gaussians (zero-speed particles filtered)")

film = Film(384, 288)
render(model, build_bvh(model), frame_scene(model.scene_aabb), film,
       tf_bluewhite(), TraceConfig())
with open("spiral.ppm", "wb") as sink:
    write_ppm(tonemap_8bit(film), sink)
print("wrote spiral.ppm")
