#!/usr/bin/env python3
"""Multi-resolution level stacks: per-level transforms, masking, one model.

Builds three nested levels (voxel sizes 1, 1/2, 1/4) with increasingly
fine detail near the center, masks coarse voxels hidden under finer
levels, and fits everything into a single Gaussian model.
"""

import numpy as np

from gaussvol.camera import frame_scene
from gaussvol.fitting import LodConfig, fit_stack
from gaussvol.grid import GridTransform, SparseGrid
from gaussvol.imaging import Film, tf_jet, tonemap_8bit, write_ppm
from gaussvol.ingest import AmrStack, mask_refined
from gaussvol.tracer import TraceConfig, build_bvh, render


def ball_grid(voxel_size, radius_world, value, name):
    grid = SparseGrid(GridTransform(voxel_size), name=name)
    n = int(np.ceil(2 * radius_world / voxel_size)) + 2
    center = radius_world / voxel_size
    for idx in np.ndindex(n, n, n):
        d = np.linalg.norm((np.asarray(idx) + 0.5 - center) * 1.0)
        if d * voxel_size <= radius_world:
            grid.set_voxel(idx, value)
    return grid


levels = [
    ball_grid(1.0, 8.0, 0.02, "coarse"),
    ball_grid(0.5, 5.0, 0.05, "mid"),
    ball_grid(0.25, 2.5, 0.12, "fine"),
]
before = [lvl.active_voxel_count() for lvl in levels]

stack = mask_refined(AmrStack(levels))
after = [lvl.active_voxel_count() for lvl in stack.levels]
for name, b, a in zip(("coarse", "mid", "fine"), before, after):
    print(f"{name}: {b} -> {a} active voxels after masking")

model = fit_stack(stack, LodConfig.from_lod(1))
print(f"combined model: {len(model)} gaussians")

film = Film(288, 288)
render(model, build_bvh(model), frame_scene(model.scene_aabb), film,
       tf_jet(), TraceConfig())
with open("amr_stack.ppm", "wb") as sink:
    write_ppm(tonemap_8bit(film), sink)
print("wrote amr_stack.ppm")
