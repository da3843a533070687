#!/usr/bin/env python3
"""The five detail presets on one volume: primitive counts, quality, speed.

LOD-1  dense 2^3 blocks  + smart sparse grouping
LOD-2  dense 4^3 blocks  + smart sparse grouping
LOD-3  dense 8^3 blocks  + smart sparse grouping
LOD-4  dense 8^3 blocks  + strict blocks/singletons
LOD-5  dense 8^3 blocks  + one gaussian per sparse leaf
"""

from gaussvol.compare import CSV_HEADER, compare_renderers
from gaussvol.fitting import LodConfig, fit_grid
from gaussvol.imaging import tf_grayscale
from gaussvol.ingest import gen_synthetic
from gaussvol.tracer import TraceConfig

grid = gen_synthetic("gaussian_blob", 64,
                     {"sigma": 16.0, "peak": 0.04, "threshold": 0.002,
                      "noise": 0.5, "activity_block": 2})
voxels = grid.active_voxel_count()
print(f"{voxels} active voxels")
print(CSV_HEADER)
for lod in (1, 2, 3, 4, 5):
    model = fit_grid(grid, LodConfig.from_lod(lod))
    result = compare_renderers(grid, model, tf_grayscale(), TraceConfig(),
                               192, 192, frames=3)
    print(result.csv_row(), f"  # {100.0 * len(model) / voxels:.2f}% of voxels")
