"""Dataset I/O: SVOL container files, dense-raw import, .xyz point clouds,
procedural test volumes, and multi-resolution (AMR-style) grid stacks.

SVOL is a deliberately simple little-endian container for one sparse grid:

    magic   4s   b"SVOL"
    version u32  1
    background f32
    voxel_size f64[3], origin f64[3]
    name    u16 length + utf-8 bytes
    leaf_count u64, tile_count u64
    leaves  (sorted by origin): origin i32[3], mask 64 bytes, values f32[512]
    tiles   (sorted by origin): level u8, origin i32[3], value f32

Leaf mask bytes are the 512 activity bits packed little-endian (bit i of
the stream is voxel bit i, ZYX order). Tile levels 3 and 4 are stored;
a level-5 record (whole 4096^3 slot) is accepted on read and expanded
into 32^3 level-4 tiles.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .grid import (
    L4_SPAN,
    L5_FANOUT,
    LEAF_EDGE,
    LEAF_SPAN,
    LEAF_VOXELS,
    GridTransform,
    SparseGrid,
)

SVOL_MAGIC = b"SVOL"
SVOL_VERSION = 1


class BadMagicError(ValueError):
    pass


class TruncatedStreamError(ValueError):
    pass


class VersionMismatchError(ValueError):
    pass


class MalformedLineError(ValueError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


class EmptyPointSetError(ValueError):
    pass


class UnorderedLevelsError(ValueError):
    pass


class BadDimsError(ValueError):
    pass


class LengthMismatchError(ValueError):
    pass


# -- SVOL container ----------------------------------------------------

def write_svol(grid: SparseGrid, sink) -> None:
    """Serialize a grid losslessly into a binary stream."""
    leaves = grid.leaves()
    tiles = grid.tiles()
    name = grid.name.encode("utf-8")
    sink.write(SVOL_MAGIC)
    sink.write(struct.pack("<I", SVOL_VERSION))
    sink.write(struct.pack("<f", np.float32(grid.background)))
    sink.write(struct.pack("<3d", *grid.transform.voxel_size))
    sink.write(struct.pack("<3d", *grid.transform.origin))
    sink.write(struct.pack("<H", len(name)))
    sink.write(name)
    sink.write(struct.pack("<QQ", len(leaves), len(tiles)))
    for leaf in leaves:
        sink.write(struct.pack("<3i", *leaf.origin))
        sink.write(np.packbits(leaf.value_mask, bitorder="little").tobytes())
        sink.write(leaf.values.astype("<f4").tobytes())
    for lo, _hi, value, level in tiles:
        sink.write(struct.pack("<B3if", level, *lo, np.float32(value)))


def _take(source, n: int) -> bytes:
    buf = source.read(n)
    if len(buf) != n:
        raise TruncatedStreamError(f"expected {n} bytes, got {len(buf)}")
    return buf


def read_svol(source) -> SparseGrid:
    """Parse a stream written by write_svol back into a structurally
    identical grid."""
    if _take(source, 4) != SVOL_MAGIC:
        raise BadMagicError("not an SVOL stream")
    (version,) = struct.unpack("<I", _take(source, 4))
    if version != SVOL_VERSION:
        raise VersionMismatchError(f"unsupported SVOL version {version}")
    (background,) = struct.unpack("<f", _take(source, 4))
    voxel_size = struct.unpack("<3d", _take(source, 24))
    origin = struct.unpack("<3d", _take(source, 24))
    (name_len,) = struct.unpack("<H", _take(source, 2))
    name = _take(source, name_len).decode("utf-8")
    leaf_count, tile_count = struct.unpack("<QQ", _take(source, 16))

    grid = SparseGrid(GridTransform(voxel_size, origin), background, name)
    for _ in range(leaf_count):
        leaf_origin = struct.unpack("<3i", _take(source, 12))
        mask = np.unpackbits(
            np.frombuffer(_take(source, 64), np.uint8), bitorder="little"
        ).astype(bool)
        values = np.frombuffer(_take(source, 4 * LEAF_VOXELS), "<f4").copy()
        leaf = grid.get_or_create_leaf(leaf_origin)
        leaf.value_mask[:] = mask
        leaf.values[:] = values
    for _ in range(tile_count):
        level, ox, oy, oz, value = struct.unpack("<B3if", _take(source, 17))
        if level == 5:
            # expand a whole top-node tile into its 32^3 level-4 slots
            for cx, cy, cz in product(range(L5_FANOUT), repeat=3):
                grid.set_tile(
                    4, (ox + cx * L4_SPAN, oy + cy * L4_SPAN, oz + cz * L4_SPAN), value
                )
        else:
            grid.set_tile(level, (ox, oy, oz), value)
    return grid


# -- dense raw import ----------------------------------------------------

def import_raw_dense(dims, data, activity_threshold: float,
                     transform: GridTransform | None = None,
                     background: float = 0.0, name: str = "") -> SparseGrid:
    """Build a sparse grid from a dense scalar array.

    A voxel at (x, y, z) reads data[x*ny*nz + y*nz + z]; it becomes active
    iff |value| > activity_threshold, and active values are kept exactly.
    """
    dims = tuple(int(d) for d in dims)
    data = np.asarray(data, np.float32).ravel()
    if data.size != dims[0] * dims[1] * dims[2]:
        raise LengthMismatchError(
            f"data length {data.size} does not match dims {dims}"
        )
    volume = data.reshape(dims)
    grid = SparseGrid(transform if transform is not None else GridTransform(),
                      background, name)
    thr = np.float32(activity_threshold)
    for lx in range(0, dims[0], LEAF_SPAN):
        for ly in range(0, dims[1], LEAF_SPAN):
            for lz in range(0, dims[2], LEAF_SPAN):
                block = volume[lx:lx + LEAF_EDGE, ly:ly + LEAF_EDGE, lz:lz + LEAF_EDGE]
                active = np.abs(block) > thr
                if not active.any():
                    continue
                if block.shape != (LEAF_EDGE, LEAF_EDGE, LEAF_EDGE):
                    pad = [(0, LEAF_EDGE - s) for s in block.shape]
                    block = np.pad(block, pad)
                    active = np.pad(active, pad)
                leaf = grid.get_or_create_leaf((lx, ly, lz))
                leaf.value_mask[:] = active.ravel()
                leaf.values[:] = np.where(active, block, np.float32(background)).ravel()
    return grid


# -- point clouds --------------------------------------------------------

@dataclass
class PointSet:
    """Particle positions with per-particle speed (velocity magnitude)."""

    positions: np.ndarray            # (N, 3) float64, world space
    velocity_magnitudes: np.ndarray  # (N,) float64, >= 0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, np.float64).reshape(-1, 3)
        self.velocity_magnitudes = np.asarray(self.velocity_magnitudes, np.float64).ravel()
        if len(self.positions) != len(self.velocity_magnitudes):
            raise ValueError("positions and velocity_magnitudes length mismatch")

    def __len__(self) -> int:
        return len(self.positions)


def parse_xyz(source) -> PointSet:
    """Parse whitespace-separated ``x y z vx vy vz`` text.

    Blank lines and lines starting with '#' are skipped; extra trailing
    columns are ignored. Velocity magnitude is the Euclidean norm of
    (vx, vy, vz).
    """
    positions = []
    speeds = []
    for line_no, line in enumerate(source, start=1):
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split()
        if len(fields) < 6:
            raise MalformedLineError(line_no, f"expected >=6 columns, got {len(fields)}")
        try:
            x, y, z, vx, vy, vz = (float(f) for f in fields[:6])
        except ValueError:
            raise MalformedLineError(line_no, "non-numeric field") from None
        positions.append((x, y, z))
        speeds.append(float(np.hypot(np.hypot(vx, vy), vz)))
    return PointSet(np.asarray(positions, np.float64).reshape(-1, 3),
                    np.asarray(speeds, np.float64))


def serialize_xyz(points: PointSet, sink) -> None:
    """Inverse of parse_xyz up to formatting; speeds are written along +x."""
    for pos, speed in zip(points.positions, points.velocity_magnitudes):
        sink.write(f"{float(pos[0])!r} {float(pos[1])!r} {float(pos[2])!r} "
                   f"{float(speed)!r} 0.0 0.0\n")


@dataclass
class PointGrid:
    """Points bucketed into a sparse grid sized for ~1 point per voxel."""

    grid: SparseGrid
    points: PointSet
    voxel_size: float
    buckets: dict = field(default_factory=dict)  # voxel index -> list of point ids


def point_grid_voxel_size(points: PointSet) -> float:
    """Edge length giving about one particle per voxel over the bbox."""
    if len(points) == 0:
        raise EmptyPointSetError("no points")
    extent = points.positions.max(axis=0) - points.positions.min(axis=0)
    volume = float(np.prod(extent))
    if volume <= 0.0:
        return 1.0  # degenerate bbox (single point / coplanar set)
    return max(float(np.cbrt(volume / len(points))), 1e-12)


def build_point_grid(points: PointSet, name: str = "points") -> PointGrid:
    if len(points) == 0:
        raise EmptyPointSetError("no points")
    h = point_grid_voxel_size(points)
    origin = points.positions.min(axis=0)
    transform = GridTransform(h, origin)
    grid = SparseGrid(transform, 0.0, name)
    idx = np.floor((points.positions - origin) / h).astype(np.int64)
    buckets: dict[tuple[int, int, int], list[int]] = {}
    for pid, key in enumerate(map(tuple, idx)):
        buckets.setdefault(key, []).append(pid)
    for key, members in sorted(buckets.items()):
        grid.set_voxel(key, float(len(members)))
    return PointGrid(grid, points, h, buckets)


# -- procedural volumes --------------------------------------------------

SYNTHETIC_KINDS = ("sphere_shell", "gaussian_blob", "checker", "wavelet_like")


def gen_synthetic(kind: str, dims, params: dict | None = None, seed: int = 0,
                  transform: GridTransform | None = None) -> SparseGrid:
    """Deterministic procedural volume for tests and demos.

    kinds:
      gaussian_blob  exp(-r^2 / (2 sigma^2)) around the volume center;
                     params: sigma (default min(dims)/6), peak (1.0),
                     threshold (activity cutoff, 1e-3)
      sphere_shell   constant value on |r - radius| <= thickness/2;
                     params: radius (0.35*min(dims)), thickness (2.0), value (1.0)
      checker        alternating constant blocks; params: block (8), value (1.0)
      wavelet_like   bandpass sinusoid product under a Gaussian envelope;
                     params: cycles (3.0), threshold (0.05)
    """
    dims = tuple(int(d) for d in np.broadcast_to(np.asarray(dims), (3,)))
    if any(d < 8 or d > 1024 for d in dims):
        raise BadDimsError(f"dims components must be in [8, 1024], got {dims}")
    params = dict(params or {})
    rng = np.random.default_rng(seed)
    x, y, z = np.meshgrid(*(np.arange(d, dtype=np.float64) + 0.5 for d in dims),
                          indexing="ij")
    center = np.asarray(dims, np.float64) / 2.0
    r = np.sqrt((x - center[0]) ** 2 + (y - center[1]) ** 2 + (z - center[2]) ** 2)

    if kind == "gaussian_blob":
        sigma = float(params.get("sigma", min(dims) / 6.0))
        peak = float(params.get("peak", 1.0))
        threshold = float(params.get("threshold", 1e-3))
        field_ = peak * np.exp(-0.5 * (r / sigma) ** 2)
    elif kind == "sphere_shell":
        radius = float(params.get("radius", 0.35 * min(dims)))
        thickness = float(params.get("thickness", 2.0))
        value = float(params.get("value", 1.0))
        field_ = np.where(np.abs(r - radius) <= thickness / 2.0, value, 0.0)
        threshold = 0.0
    elif kind == "checker":
        block = int(params.get("block", 8))
        value = float(params.get("value", 1.0))
        parity = ((x // block) + (y // block) + (z // block)) % 2
        field_ = np.where(parity == 0, value, 0.0)
        threshold = 0.0
    elif kind == "wavelet_like":
        cycles = float(params.get("cycles", 3.0))
        threshold = float(params.get("threshold", 0.05))
        envelope = np.exp(-0.5 * (r / (min(dims) / 4.0)) ** 2)
        waves = (np.sin(2 * np.pi * cycles * x / dims[0])
                 * np.sin(2 * np.pi * cycles * y / dims[1])
                 * np.sin(2 * np.pi * cycles * z / dims[2]))
        field_ = envelope * waves
    else:
        raise ValueError(f"unknown synthetic kind {kind!r}")

    noise = float(params.get("noise", 0.0))
    if noise > 0.0:
        # multiplicative so activity and sign are preserved
        field_ = field_ * rng.uniform(1.0 - noise, 1.0 + noise, dims)

    active_block = int(params.get("activity_block", 1))
    if active_block > 1:
        # decide activity per aligned block so the active-set boundary has
        # no block stragglers; kept voxels are floored safely above the cut
        if any(d % active_block for d in dims):
            raise BadDimsError("dims must be divisible by activity_block")
        b = active_block
        coarse = np.abs(field_).reshape(dims[0] // b, b, dims[1] // b, b,
                                        dims[2] // b, b).mean(axis=(1, 3, 5))
        keep = np.repeat(np.repeat(np.repeat(
            coarse > threshold, b, 0), b, 1), b, 2)
        floor = np.float64(np.nextafter(np.float32(threshold), np.float32(np.inf)))
        field_ = np.where(keep, np.maximum(field_, 2.0 * floor), 0.0)

    return import_raw_dense(dims, field_.astype(np.float32), threshold,
                            transform, name=f"{kind}-{dims[0]}x{dims[1]}x{dims[2]}")


# -- AMR-style level stacks ----------------------------------------------

@dataclass
class AmrStack:
    """Ordered refinement levels, coarse first, each with its own transform."""

    levels: list
    refinement_masked: bool = False

    def __post_init__(self):
        sizes = [lvl.transform.voxel_size for lvl in self.levels]
        for coarse, fine in zip(sizes, sizes[1:]):
            if not np.all(fine < coarse):
                raise UnorderedLevelsError(
                    "levels must be ordered coarse to fine (strictly decreasing voxel size)"
                )


def _voxel_world_box(grid: SparseGrid, index) -> tuple[np.ndarray, np.ndarray]:
    idx = np.asarray(index, np.float64)
    return grid.transform.index_to_world(idx), grid.transform.index_to_world(idx + 1.0)


def _box_covered(bmin, bmax, finer: list, eps: float) -> bool:
    """True iff [bmin, bmax] is contained in the union of active voxel
    extents of the given finer grids (recursive box subtraction)."""
    if np.any(bmax - bmin <= eps):
        return True
    if not finer:
        return False
    grid = finer[0]
    h = grid.transform.voxel_size
    origin = grid.transform.origin
    lo = np.floor((bmin - origin) / h + 1e-9).astype(np.int64)
    hi = np.ceil((bmax - origin) / h - 1e-9).astype(np.int64)
    for cell in product(*(range(lo[a], hi[a]) for a in range(3))):
        _, active = grid.get_voxel(cell)
        if active:
            continue
        cmin, cmax = _voxel_world_box(grid, cell)
        pmin = np.maximum(bmin, cmin)
        pmax = np.minimum(bmax, cmax)
        if np.all(pmax - pmin > eps) and not _box_covered(pmin, pmax, finer[1:], eps):
            return False
    return True


def _active_cells(grid: SparseGrid):
    """Yield (index, value) over every active voxel, expanding tiles."""
    for leaf in grid.leaves():
        values = leaf.values
        for bit in leaf.active_bits():
            b = int(bit)
            local = (b >> 6, (b >> 3) & 7, b & 7)
            yield (leaf.origin[0] + local[0], leaf.origin[1] + local[1],
                   leaf.origin[2] + local[2]), float(values[b])
    for lo, hi, value, _level in grid.tiles():
        for idx in product(*(range(lo[a], hi[a]) for a in range(3))):
            yield idx, value


def mask_refined(stack: AmrStack) -> AmrStack:
    """Deactivate coarse voxels whose world extent is fully covered by the
    union of active extents of all finer levels. Idempotent."""
    masked_levels = []
    n = len(stack.levels)
    for i, level in enumerate(stack.levels):
        finer = stack.levels[i + 1:]
        if i == n - 1 or all(f.is_empty() for f in finer):
            masked_levels.append(level)
            continue
        eps = 1e-9 * float(np.min(stack.levels[-1].transform.voxel_size))
        out = SparseGrid(level.transform, level.background, level.name)
        for idx, value in _active_cells(level):
            bmin, bmax = _voxel_world_box(level, idx)
            if not _box_covered(bmin, bmax, finer, eps):
                out.set_voxel(idx, value)
        masked_levels.append(out)
    return AmrStack(masked_levels, refinement_masked=True)
