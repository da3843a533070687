"""Conversion of sparse grids, point grids and level stacks into
axis-aligned Gaussian models.

Each Gaussian stores a world-space center, per-axis radius and a scalar
opacity coefficient. The radius is the per-axis standard deviation of an
unnormalized density exp(-(x-c)^T S^-1 (x-c)) with S = diag(radius^2),
chosen so that the 1-sigma box of a fitted Gaussian coincides with the
voxel region it was fitted to.

Dense leaves are partitioned into fixed blocks (2/4/8 voxels per edge,
one Gaussian per block). Sparse leaves use one of three strategies:

  smart   greedy aligned 2x2x2 blocks of active voxels, then greedy
          face-adjacent pairs among the leftovers (+X, -X, +Y, -Y, +Z,
          -Z search order, ZYX scan), then singletons
  strict  the same block pass; every leftover becomes a singleton
  single  one Gaussian per leaf spanning the tight bounding box of its
          active voxels

Constant tiles become one Gaussian spanning the tile box. Every candidate
is dropped unless its opacity (group mean value) exceeds the configured
threshold, and radii are clamped below to avoid degenerate ellipsoids.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .grid import (
    LEAF_EDGE,
    EmptyGridError,
    GridTransform,
    LeafNode,
    SparseGrid,
)
from .ingest import EmptyPointSetError, PointGrid

GGM_MAGIC = b"GGM1"

SPARSE_STRATEGIES = ("smart", "strict", "single")

# dense block edge and sparse strategy per detail preset
LOD_PRESETS = {
    1: (2, "smart"),
    2: (4, "smart"),
    3: (8, "smart"),
    4: (8, "strict"),
    5: (8, "single"),
}


class NotDenseError(ValueError):
    pass


class EmptyLeafError(ValueError):
    pass


class CenterOutsideSceneError(ValueError):
    pass


@dataclass(frozen=True)
class LodConfig:
    """Level-of-detail knobs for the fitter.

    radius_min of None resolves to 0.25 * min(voxel_size) of the grid
    being fitted.
    """

    dense_block: int = 2
    sparse_strategy: str = "smart"
    opacity_threshold: float = 1e-4
    radius_min: float | None = None
    sigma_multiplier: int = 2

    def __post_init__(self):
        if self.dense_block not in (2, 4, 8):
            raise ValueError(f"dense_block must be 2, 4 or 8, got {self.dense_block}")
        if self.sparse_strategy not in SPARSE_STRATEGIES:
            raise ValueError(f"unknown sparse strategy {self.sparse_strategy!r}")
        if not 1e-6 <= self.opacity_threshold <= 1e-3:
            raise ValueError("opacity_threshold must lie in [1e-6, 1e-3]")
        if self.radius_min is not None and not self.radius_min > 0:
            raise ValueError("radius_min must be positive")
        if self.sigma_multiplier not in (1, 2, 3):
            raise ValueError("sigma_multiplier must be 1, 2 or 3")

    @classmethod
    def from_lod(cls, lod: int, **overrides) -> "LodConfig":
        block, strategy = LOD_PRESETS[int(lod)]
        return cls(dense_block=block, sparse_strategy=strategy, **overrides)

    def lod_label(self) -> str:
        for lod, preset in LOD_PRESETS.items():
            if preset == (self.dense_block, self.sparse_strategy):
                return str(lod)
        return "custom"

    def resolve_radius_min(self, voxel_size) -> float:
        if self.radius_min is not None:
            return float(self.radius_min)
        return 0.25 * float(np.min(voxel_size))


@dataclass(frozen=True)
class Gaussian:
    center: tuple[float, float, float]
    radius: tuple[float, float, float]
    opacity: float


@dataclass
class GaussianModel:
    """Flat Gaussian arrays plus per-primitive boxes and scene bounds."""

    centers: np.ndarray    # (N, 3) float32
    radii: np.ndarray      # (N, 3) float32
    opacities: np.ndarray  # (N,) float32
    aabbs: np.ndarray      # (N, 6) float64: min xyz, max xyz
    scene_aabb: np.ndarray  # (6,) float64
    source_label: str
    lod: LodConfig

    def __len__(self) -> int:
        return len(self.centers)

    def gaussian(self, i: int) -> Gaussian:
        return Gaussian(tuple(map(float, self.centers[i])),
                        tuple(map(float, self.radii[i])),
                        float(self.opacities[i]))


def gaussian_aabb(center, radius, sigma: int, scene_min, scene_max) -> np.ndarray:
    """Symmetric sigma-scaled box around a Gaussian, clipped to the scene."""
    center = np.asarray(center, np.float64)
    radius = np.asarray(radius, np.float64)
    scene_min = np.asarray(scene_min, np.float64)
    scene_max = np.asarray(scene_max, np.float64)
    if np.any(center < scene_min) or np.any(center > scene_max):
        raise CenterOutsideSceneError(
            f"gaussian center {center} outside scene box [{scene_min}, {scene_max}]"
        )
    lo = np.maximum(center - sigma * radius, scene_min)
    hi = np.minimum(center + sigma * radius, scene_max)
    return np.concatenate([lo, hi])


def _build_aabbs(centers, radii, sigma, scene_min, scene_max) -> np.ndarray:
    centers = np.asarray(centers, np.float64)
    radii = np.asarray(radii, np.float64)
    # tolerance absorbs the float32 quantization of stored centers
    tol = 1e-5 * np.maximum(scene_max - scene_min, 1.0)
    if np.any(centers < scene_min - tol) or np.any(centers > scene_max + tol):
        raise CenterOutsideSceneError("gaussian center outside scene box")
    lo = np.maximum(centers - sigma * radii, scene_min)
    hi = np.minimum(centers + sigma * radii, scene_max)
    return np.concatenate([lo, hi], axis=1)


# -- group extraction on leaf masks ---------------------------------------

def block_groups(mask3d: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Aligned full 2x2x2 blocks of active voxels, in ZYX order of block
    origin. Returns (groups, leftover_mask); each group is an (8, 3) array
    of local indices."""
    blocks = mask3d.reshape(4, 2, 4, 2, 4, 2).all(axis=(1, 3, 5))
    groups = []
    leftover = mask3d.copy()
    for bx, by, bz in np.argwhere(blocks):
        base = np.array([bx * 2, by * 2, bz * 2])
        offs = np.stack(np.meshgrid([0, 1], [0, 1], [0, 1], indexing="ij"),
                        axis=-1).reshape(8, 3)
        groups.append(base + offs)
        leftover[bx * 2:bx * 2 + 2, by * 2:by * 2 + 2, bz * 2:bz * 2 + 2] = False
    return groups, leftover


_PAIR_DIRECTIONS = np.array([
    [1, 0, 0], [-1, 0, 0],
    [0, 1, 0], [0, -1, 0],
    [0, 0, 1], [0, 0, -1],
])


def smart_groups(mask3d: np.ndarray) -> list[np.ndarray]:
    """Full 2^3 blocks, then greedy face-adjacent pairs, then singletons."""
    groups, leftover = block_groups(mask3d)
    used = ~leftover  # consumed or inactive
    for x, y, z in np.argwhere(leftover):
        if used[x, y, z]:
            continue
        member = np.array([x, y, z])
        paired = False
        for d in _PAIR_DIRECTIONS:
            n = member + d
            if np.any(n < 0) or np.any(n >= LEAF_EDGE):
                continue
            if mask3d[tuple(n)] and not used[tuple(n)]:
                groups.append(np.stack([member, n]))
                used[tuple(member)] = True
                used[tuple(n)] = True
                paired = True
                break
        if not paired:
            groups.append(member.reshape(1, 3))
            used[x, y, z] = True
    return groups


def strict_groups(mask3d: np.ndarray) -> list[np.ndarray]:
    """Full 2^3 blocks; every leftover becomes a singleton."""
    groups, leftover = block_groups(mask3d)
    groups.extend(idx.reshape(1, 3) for idx in np.argwhere(leftover))
    return groups


# -- per-leaf fitters ------------------------------------------------------

def _group_gaussian(members: np.ndarray, leaf: LeafNode, transform: GridTransform,
                    radius_min: float) -> Gaussian:
    origin = np.asarray(leaf.origin, np.float64)
    centers_idx = origin + members + 0.5
    centroid = transform.index_to_world(centers_idx.mean(axis=0))
    lo = transform.index_to_world(origin + members.min(axis=0))
    hi = transform.index_to_world(origin + members.max(axis=0) + 1.0)
    radius = np.maximum((hi - lo) / 2.0, radius_min)
    bits = members[:, 0] * 64 + members[:, 1] * 8 + members[:, 2]
    opacity = float(leaf.values[bits].mean(dtype=np.float64))
    return Gaussian(tuple(centroid), tuple(radius), opacity)


def fit_dense_leaf(leaf: LeafNode, block: int, transform: GridTransform,
                   cfg: LodConfig) -> list[Gaussian]:
    """One Gaussian per aligned block of a fully active leaf."""
    if not leaf.is_dense():
        raise NotDenseError(f"leaf at {leaf.origin} is not dense")
    if block not in (2, 4, 8):
        raise ValueError(f"block must be 2, 4 or 8, got {block}")
    radius_min = cfg.resolve_radius_min(transform.voxel_size)
    per_edge = LEAF_EDGE // block
    means = leaf.values3d().reshape(
        per_edge, block, per_edge, block, per_edge, block
    ).mean(axis=(1, 3, 5), dtype=np.float64)
    origin = np.asarray(leaf.origin, np.float64)
    radius = np.maximum((block / 2.0) * transform.voxel_size, radius_min)
    out = []
    for bx in range(per_edge):
        for by in range(per_edge):
            for bz in range(per_edge):
                opacity = float(means[bx, by, bz])
                if opacity <= cfg.opacity_threshold:
                    continue
                center_idx = origin + (np.array([bx, by, bz]) + 0.5) * block
                out.append(Gaussian(tuple(transform.index_to_world(center_idx)),
                                    tuple(radius), opacity))
    return out


def _fit_groups(groups, leaf, transform, cfg) -> list[Gaussian]:
    radius_min = cfg.resolve_radius_min(transform.voxel_size)
    out = []
    for members in groups:
        g = _group_gaussian(members, leaf, transform, radius_min)
        if g.opacity > cfg.opacity_threshold:
            out.append(g)
    return out


def fit_sparse_smart(leaf: LeafNode, transform: GridTransform,
                     cfg: LodConfig) -> list[Gaussian]:
    if leaf.active_count() == 0:
        raise EmptyLeafError(f"leaf at {leaf.origin} has no active voxels")
    return _fit_groups(smart_groups(leaf.mask3d()), leaf, transform, cfg)


def fit_sparse_strict(leaf: LeafNode, transform: GridTransform,
                      cfg: LodConfig) -> list[Gaussian]:
    if leaf.active_count() == 0:
        raise EmptyLeafError(f"leaf at {leaf.origin} has no active voxels")
    return _fit_groups(strict_groups(leaf.mask3d()), leaf, transform, cfg)


def fit_sparse_single(leaf: LeafNode, transform: GridTransform,
                      cfg: LodConfig) -> list[Gaussian]:
    """One Gaussian spanning the tight box of the leaf's active voxels."""
    if leaf.active_count() == 0:
        raise EmptyLeafError(f"leaf at {leaf.origin} has no active voxels")
    radius_min = cfg.resolve_radius_min(transform.voxel_size)
    bits = leaf.active_bits()
    locs = np.stack([bits >> 6, (bits >> 3) & 7, bits & 7], axis=1)
    origin = np.asarray(leaf.origin, np.float64)
    lo = transform.index_to_world(origin + locs.min(axis=0))
    hi = transform.index_to_world(origin + locs.max(axis=0) + 1.0)
    opacity = float(leaf.values[bits].mean(dtype=np.float64))
    if opacity <= cfg.opacity_threshold:
        return []
    radius = np.maximum((hi - lo) / 2.0, radius_min)
    return [Gaussian(tuple((lo + hi) / 2.0), tuple(radius), opacity)]


_SPARSE_FITTERS = {
    "smart": fit_sparse_smart,
    "strict": fit_sparse_strict,
    "single": fit_sparse_single,
}


# -- whole-source fitters --------------------------------------------------

def _fit_leaf(leaf: LeafNode, transform: GridTransform, cfg: LodConfig) -> list[Gaussian]:
    if leaf.is_dense():
        return fit_dense_leaf(leaf, cfg.dense_block, transform, cfg)
    return _SPARSE_FITTERS[cfg.sparse_strategy](leaf, transform, cfg)


def _tile_gaussian(lo_idx, hi_idx, value: float, transform: GridTransform,
                   cfg: LodConfig) -> Gaussian | None:
    if value <= cfg.opacity_threshold:
        return None
    radius_min = cfg.resolve_radius_min(transform.voxel_size)
    lo = transform.index_to_world(np.asarray(lo_idx, np.float64))
    hi = transform.index_to_world(np.asarray(hi_idx, np.float64))
    radius = np.maximum((hi - lo) / 2.0, radius_min)
    return Gaussian(tuple((lo + hi) / 2.0), tuple(radius), float(value))


def _pack_model(gaussians: list[Gaussian], scene_lo, scene_hi, label: str,
                cfg: LodConfig) -> GaussianModel:
    n = len(gaussians)
    centers = np.array([g.center for g in gaussians], np.float32).reshape(n, 3)
    radii = np.array([g.radius for g in gaussians], np.float32).reshape(n, 3)
    opac = np.array([g.opacity for g in gaussians], np.float32).reshape(n)
    scene = np.concatenate([np.asarray(scene_lo, np.float64),
                            np.asarray(scene_hi, np.float64)])
    aabbs = _build_aabbs(centers.astype(np.float64), radii.astype(np.float64),
                         cfg.sigma_multiplier, scene[:3], scene[3:])
    return GaussianModel(centers, radii, opac, aabbs, scene, label, cfg)


def fit_grid(grid: SparseGrid, cfg: LodConfig, workers: int = 0) -> GaussianModel:
    """Fit every leaf (dense or sparse strategy) plus one Gaussian per tile.

    Leaves are independent work items; with workers > 0 they are fitted
    on a thread pool, and results are merged in leaf order regardless of
    completion order, so the output is identical to a sequential fit.
    """
    if grid.is_empty():
        raise EmptyGridError("cannot fit an empty grid")
    leaves = [leaf for leaf in grid.leaves() if leaf.active_count() > 0]
    transform = grid.transform
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_leaf = list(pool.map(lambda lf: _fit_leaf(lf, transform, cfg), leaves))
    else:
        per_leaf = [_fit_leaf(leaf, transform, cfg) for leaf in leaves]
    gaussians = [g for chunk in per_leaf for g in chunk]
    for lo, hi, value, _level in grid.tiles():
        g = _tile_gaussian(lo, hi, value, transform, cfg)
        if g is not None:
            gaussians.append(g)
    scene_lo, scene_hi = grid.world_aabb()
    return _pack_model(gaussians, scene_lo, scene_hi, grid.name or "grid", cfg)


def fit_points(pg: PointGrid, cfg: LodConfig) -> GaussianModel:
    """One isotropic Gaussian per particle; opacity is the velocity
    magnitude normalized to [0, 1] by the set maximum."""
    if len(pg.points) == 0:
        raise EmptyPointSetError("no points")
    radius_min = cfg.resolve_radius_min(pg.grid.transform.voxel_size)
    radius = max(pg.voxel_size / 2.0, radius_min)
    vmax = float(pg.points.velocity_magnitudes.max())
    scale = 1.0 / vmax if vmax > 0 else 0.0
    gaussians = []
    for pos, mag in zip(pg.points.positions, pg.points.velocity_magnitudes):
        opacity = float(mag) * scale
        if opacity <= cfg.opacity_threshold:
            continue
        gaussians.append(Gaussian(tuple(pos), (radius, radius, radius), opacity))
    scene_lo, scene_hi = pg.grid.world_aabb()
    return _pack_model(gaussians, scene_lo, scene_hi, pg.grid.name or "points", cfg)


def fit_stack(stack, cfg: LodConfig) -> GaussianModel:
    """Fit each refinement level with its own transform and concatenate,
    coarse to fine, under a shared scene box."""
    nonempty = [lvl for lvl in stack.levels if not lvl.is_empty()]
    if not nonempty:
        raise EmptyGridError("all levels are empty")
    los, his = zip(*(lvl.world_aabb() for lvl in nonempty))
    scene_lo = np.min(np.stack(los), axis=0)
    scene_hi = np.max(np.stack(his), axis=0)
    models = [fit_grid(lvl, cfg) for lvl in nonempty]
    centers = np.concatenate([m.centers for m in models])
    radii = np.concatenate([m.radii for m in models])
    opac = np.concatenate([m.opacities for m in models])
    scene = np.concatenate([scene_lo, scene_hi])
    aabbs = _build_aabbs(centers.astype(np.float64), radii.astype(np.float64),
                         cfg.sigma_multiplier, scene[:3], scene[3:])
    label = "+".join(m.source_label for m in models)
    return GaussianModel(centers, radii, opac, aabbs, scene, label, cfg)


def with_sigma(model: GaussianModel, sigma: int) -> GaussianModel:
    """Rebuild the model's boxes for a different sigma multiplier."""
    cfg = replace(model.lod, sigma_multiplier=sigma)
    aabbs = _build_aabbs(model.centers.astype(np.float64),
                         model.radii.astype(np.float64),
                         sigma, model.scene_aabb[:3], model.scene_aabb[3:])
    return GaussianModel(model.centers, model.radii, model.opacities, aabbs,
                         model.scene_aabb, model.source_label, cfg)


# -- GGM container ---------------------------------------------------------

def write_ggm(model: GaussianModel, sink) -> None:
    label = model.source_label.encode("utf-8")
    cfg = model.lod
    radius_min = cfg.radius_min if cfg.radius_min is not None else -1.0
    sink.write(GGM_MAGIC)
    sink.write(struct.pack("<Q", len(model)))
    sink.write(struct.pack("<BB", cfg.dense_block,
                           SPARSE_STRATEGIES.index(cfg.sparse_strategy)))
    sink.write(struct.pack("<ddB", cfg.opacity_threshold, radius_min,
                           cfg.sigma_multiplier))
    sink.write(struct.pack("<6d", *model.scene_aabb))
    sink.write(struct.pack("<H", len(label)))
    sink.write(label)
    packed = np.concatenate(
        [model.centers, model.radii, model.opacities[:, None]], axis=1
    ).astype("<f4")
    sink.write(packed.tobytes())


def read_ggm(source) -> GaussianModel:
    from .ingest import BadMagicError, TruncatedStreamError, _take

    if _take(source, 4) != GGM_MAGIC:
        raise BadMagicError("not a GGM stream")
    (count,) = struct.unpack("<Q", _take(source, 8))
    dense_block, strategy_id = struct.unpack("<BB", _take(source, 2))
    opacity_threshold, radius_min, sigma = struct.unpack("<ddB", _take(source, 17))
    scene = np.array(struct.unpack("<6d", _take(source, 48)), np.float64)
    (label_len,) = struct.unpack("<H", _take(source, 2))
    label = _take(source, label_len).decode("utf-8")
    cfg = LodConfig(dense_block=dense_block,
                    sparse_strategy=SPARSE_STRATEGIES[strategy_id],
                    opacity_threshold=opacity_threshold,
                    radius_min=None if radius_min < 0 else radius_min,
                    sigma_multiplier=sigma)
    packed = np.frombuffer(_take(source, 28 * count), "<f4").reshape(count, 7)
    centers = packed[:, 0:3].copy()
    radii = packed[:, 3:6].copy()
    opac = packed[:, 6].copy()
    aabbs = _build_aabbs(centers.astype(np.float64), radii.astype(np.float64),
                         sigma, scene[:3], scene[3:])
    return GaussianModel(centers, radii, opac, aabbs, scene, label, cfg)
