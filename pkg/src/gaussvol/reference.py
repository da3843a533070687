"""Reference renderer: boundary-exact ray marching of the sparse voxel
tree, accumulating optical depth from voxel values.

The march is a hierarchical digital differential analyzer over the 5-4-3
tree: rays walk top-node cells, descend into allocated subtrees, cross
constant tiles as single segments and visit individual voxels only inside
allocated leaves, so fully inactive regions are skipped at the coarsest
level that proves them empty. In voxel_exact mode every active voxel or
tile crossed contributes value * segment_length * density_scale, which
makes the result an exact piecewise-constant line integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import L4_SPAN, L5_SPAN, LEAF_SPAN, SparseGrid
from .imaging import Film, TransferFunction
from .tracer import Ray, shade_batch

_MAX_DENSE_CELLS = 768 ** 3


@dataclass(frozen=True)
class MarchConfig:
    step_mode: str = "voxel_exact"
    fixed_step: float = 0.5
    density_scale: float = 1.0

    def __post_init__(self):
        if self.step_mode not in ("voxel_exact", "fixed_step"):
            raise ValueError(f"unknown step mode {self.step_mode!r}")
        if self.step_mode == "fixed_step" and not self.fixed_step > 0:
            raise ValueError("fixed_step must be positive")
        if not self.density_scale > 0:
            raise ValueError("density_scale must be positive")


def _clip_segment(origin, direction, box_lo, box_hi, t_min, t_max):
    """Parametric overlap of a ray segment with a closed box."""
    t0, t1 = t_min, t_max
    for a in range(3):
        d = direction[a]
        if d == 0.0:
            if origin[a] < box_lo[a] or origin[a] > box_hi[a]:
                return None
            continue
        lo_t = (box_lo[a] - origin[a]) / d
        hi_t = (box_hi[a] - origin[a]) / d
        if lo_t > hi_t:
            lo_t, hi_t = hi_t, lo_t
        t0 = max(t0, lo_t)
        t1 = min(t1, hi_t)
    if t0 > t1:
        return None
    return t0, t1


def _walk_cells(io, idir, ta, tb, span, clamp=None):
    """Yield (cell_index, t0, t1) partitioning [ta, tb] into crossings of
    the size-`span` lattice, Amanatides-Woo style.

    `clamp` (lo, hi inclusive) pins the starting cell inside a parent
    cell's range; entry points that sit exactly on a shared boundary
    plane would otherwise floor into the neighbor.
    """
    pos = io + ta * idir
    cell = np.floor(pos / span).astype(np.int64)
    if clamp is not None:
        cell = np.clip(cell, clamp[0], clamp[1])
    step = np.where(idir > 0, 1, -1)
    t_max = np.full(3, math.inf)
    t_delta = np.full(3, math.inf)
    for a in range(3):
        if idir[a] > 0:
            t_max[a] = ((cell[a] + 1) * span - io[a]) / idir[a]
            t_delta[a] = span / idir[a]
        elif idir[a] < 0:
            t_max[a] = (cell[a] * span - io[a]) / idir[a]
            t_delta[a] = -span / idir[a]
    t = ta
    guard = 0
    while t < tb:
        axis = int(np.argmin(t_max))
        t_next = min(t_max[axis], tb)
        if t_next > t:
            out = np.clip(cell, clamp[0], clamp[1]) if clamp is not None else cell
            yield (int(out[0]), int(out[1]), int(out[2])), t, t_next
        if t_max[axis] >= tb:
            break
        t = t_max[axis]
        cell[axis] += step[axis]
        t_max[axis] += t_delta[axis]
        guard += 1
        if guard > 100_000:
            raise RuntimeError("cell walk failed to terminate")
    return


def dda_march(ray: Ray, grid: SparseGrid, cfg: MarchConfig) -> tuple[float, bool]:
    """March one ray through the grid; returns (optical depth, hit_any)."""
    lo, hi = grid.world_aabb()
    seg = _clip_segment(ray.origin, ray.direction, lo, hi, ray.t_min, ray.t_max)
    if seg is None:
        return 0.0, False
    t0, t1 = seg
    vs = grid.transform.voxel_size
    io = (ray.origin - grid.transform.origin) / vs
    idir = ray.direction / vs

    if cfg.step_mode == "fixed_step":
        return _march_fixed(grid, io, idir, t0, t1, cfg)

    T = 0.0
    hit = False
    for top_cell, ta, tb in _walk_cells(io, idir, t0, t1, L5_SPAN):
        top = grid.roots.get(tuple(c * L5_SPAN for c in top_cell))
        if top is None:
            continue
        top_lo = np.asarray(top_cell, np.int64) * (L5_SPAN // L4_SPAN)
        for mid_cell, tc, td in _walk_cells(io, idir, ta, tb, L4_SPAN,
                                            (top_lo, top_lo + L5_SPAN // L4_SPAN - 1)):
            slot = top.slot_of_index(tuple(c * L4_SPAN for c in mid_cell))
            if slot in top.tiles:
                T += top.tiles[slot] * (td - tc) * cfg.density_scale
                hit = True
                continue
            mid = top.children.get(slot)
            if mid is None:
                continue
            mid_lo = np.asarray(mid_cell, np.int64) * (L4_SPAN // LEAF_SPAN)
            for leaf_cell, te, tf_ in _walk_cells(io, idir, tc, td, LEAF_SPAN,
                                                  (mid_lo, mid_lo + L4_SPAN // LEAF_SPAN - 1)):
                lslot = mid.slot_of_index(tuple(c * LEAF_SPAN for c in leaf_cell))
                if lslot in mid.tiles:
                    T += mid.tiles[lslot] * (tf_ - te) * cfg.density_scale
                    hit = True
                    continue
                leaf = mid.children.get(lslot)
                if leaf is None:
                    continue
                mask = leaf.mask3d()
                values = leaf.values3d()
                org = np.asarray(leaf.origin, np.int64)
                for vox, tg, th in _walk_cells(io, idir, te, tf_, 1,
                                               (org, org + LEAF_SPAN - 1)):
                    local = (vox[0] - org[0], vox[1] - org[1], vox[2] - org[2])
                    if mask[local]:
                        T += float(values[local]) * (th - tg) * cfg.density_scale
                        hit = True
    return T, hit


def _march_fixed(grid, io, idir, t0, t1, cfg) -> tuple[float, bool]:
    T = 0.0
    hit = False
    t = t0
    while t < t1:
        step = min(cfg.fixed_step, t1 - t)
        mid = t + step / 2.0
        idx = tuple(int(v) for v in np.floor(io + mid * idir))
        value, active = grid.get_voxel(idx)
        if active:
            T += value * step * cfg.density_scale
            hit = True
        t += step
    return T, hit


# -- vectorized whole-frame path -------------------------------------------

def dense_fields(grid: SparseGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Contribution and activity lattices over the grid's index bounds,
    with tiles baked in. Cached on the grid (it is immutable once built)."""
    key = ("dense_fields", grid._version)
    cached = grid._cache.get(key)
    if cached is not None:
        return cached
    lo, hi = grid.index_bounds()
    shape = tuple(int(v) for v in (hi - lo))
    if int(np.prod(shape)) > _MAX_DENSE_CELLS:
        raise MemoryError(f"grid index extent {shape} too large to densify")
    contrib = np.zeros(shape, np.float64)
    active = np.zeros(shape, bool)
    hi_arr = np.asarray(hi, np.int64)
    for leaf in grid.leaves():
        org = np.asarray(leaf.origin, np.int64)
        a_lo = np.maximum(org, lo)
        a_hi = np.minimum(org + LEAF_SPAN, hi_arr)
        if np.any(a_hi <= a_lo):
            continue
        dst = tuple(slice(int(a_lo[a] - lo[a]), int(a_hi[a] - lo[a])) for a in range(3))
        src = tuple(slice(int(a_lo[a] - org[a]), int(a_hi[a] - org[a])) for a in range(3))
        mask = leaf.mask3d()[src]
        active[dst] |= mask
        contrib[dst] = np.where(mask, leaf.values3d()[src].astype(np.float64),
                                contrib[dst])
    for tlo, thi, value, _level in grid.tiles():
        sl = tuple(slice(int(tlo[a] - lo[a]), int(thi[a] - lo[a])) for a in range(3))
        active[sl] = True
        contrib[sl] = value
    grid._cache[key] = (lo, contrib, active)
    return lo, contrib, active


def march_batch(grid: SparseGrid, origins, dirs, cfg: MarchConfig
                ) -> tuple[np.ndarray, np.ndarray]:
    """Lockstep voxel-exact march of many rays against the densified grid.

    Produces the same sums as dda_march (the segment partition differs
    only across constant regions).
    """
    if cfg.step_mode != "voxel_exact":
        n = len(origins)
        T = np.zeros(n, np.float64)
        hit = np.zeros(n, bool)
        for i, (o, d) in enumerate(zip(origins, dirs)):
            T[i], hit[i] = dda_march(Ray(o, d), grid, cfg)
        return T, hit

    lo_idx, contrib, active = dense_fields(grid)
    shape = np.asarray(contrib.shape, np.int64)
    n = len(origins)
    T = np.zeros(n, np.float64)
    hit = np.zeros(n, bool)

    box_lo, box_hi = grid.world_aabb()
    with np.errstate(divide="ignore", invalid="ignore"):
        lo_t = (box_lo - origins) / dirs
        hi_t = (box_hi - origins) / dirs
    near = np.minimum(lo_t, hi_t)
    far = np.maximum(lo_t, hi_t)
    zero = dirs == 0.0
    if np.any(zero):
        inside = (origins >= box_lo) & (origins <= box_hi)
        near = np.where(zero, np.where(inside, -np.inf, np.inf), near)
        far = np.where(zero, np.where(inside, np.inf, -np.inf), far)
    t0 = np.maximum(near.max(axis=1), 0.0)
    t1 = far.min(axis=1)
    alive = t0 <= t1
    if not np.any(alive):
        return T, hit

    vs = grid.transform.voxel_size
    io = (origins - grid.transform.origin) / vs - lo_idx  # local index coords
    idir = dirs / vs
    t0 = np.where(alive, t0, 0.0)  # rays that miss never walk; avoid inf*0
    pos = io + t0[:, None] * idir
    cell = np.clip(np.floor(pos).astype(np.int64), 0, shape - 1)
    step = np.where(idir > 0, 1, -1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_max = np.where(
            idir > 0,
            (cell + 1 - io) / idir,
            np.where(idir < 0, (cell - io) / idir, np.inf),
        )
        t_delta = np.where(idir != 0, np.abs(1.0 / idir), np.inf)

    t_cur = t0.copy()
    flat = contrib.ravel()
    act = active.ravel()
    strides = np.array([shape[1] * shape[2], shape[2], 1], np.int64)
    max_iter = int(shape.sum()) * 2 + 8
    for _ in range(max_iter):
        ids = np.flatnonzero(alive)
        if ids.size == 0:
            break
        tm = t_max[ids]
        axis = np.argmin(tm, axis=1)
        t_next = np.minimum(tm[np.arange(ids.size), axis], t1[ids])
        seg = np.maximum(t_next - t_cur[ids], 0.0)
        fidx = (cell[ids] * strides).sum(axis=1)
        value = flat[fidx]
        is_active = act[fidx]
        T[ids] += np.where(is_active, value * seg * cfg.density_scale, 0.0)
        hit[ids] |= is_active & (seg > 0)
        # advance to the next cell, retiring rays that leave the box
        t_cur[ids] = t_max[ids, axis]
        cell[ids, axis] += step[ids, axis]
        t_max[ids, axis] += t_delta[ids, axis]
        done = (t_cur[ids] >= t1[ids]) | (cell[ids, axis] < 0) | (
            cell[ids, axis] >= shape[axis])
        alive[ids[done]] = False
    return T, hit


def render_reference(grid: SparseGrid, camera, film: Film, tf: TransferFunction,
                     cfg: MarchConfig, bg=(0.0, 0.0, 0.0), jitter_rng=None) -> None:
    """Accumulate one reference subframe into the film (shared shading)."""
    origins, dirs = camera.rays(film.width, film.height, jitter_rng)
    T, hit = march_batch(grid, origins, dirs, cfg)
    colors = shade_batch(T, hit, tf, bg)
    film.accumulate(colors.reshape(film.height, film.width, 3))
