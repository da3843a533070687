"""Fixed-depth sparse voxel tree in the 5-4-3 layout.

Index space is tiled by top nodes of 32^3 children (4096^3 voxels each),
mid nodes of 16^3 children (128^3 voxels) and leaves of 8^3 voxels. Each
internal slot is either an allocated subtree or a constant-value tile,
never both. Leaves keep a 512-bit activity mask plus densely stored
values (inactive slots hold the background) so indexed access is O(1).

Voxel bits inside a leaf are ordered ZYX: bit = x*64 + y*8 + z, so z is
the fastest-varying coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LEAF_EDGE = 8
L4_FANOUT = 16
L5_FANOUT = 32
LEAF_SPAN = LEAF_EDGE            # 8 voxels per axis
L4_SPAN = LEAF_SPAN * L4_FANOUT  # 128 voxels per axis
L5_SPAN = L4_SPAN * L5_FANOUT    # 4096 voxels per axis
LEAF_VOXELS = LEAF_EDGE ** 3     # 512


class EmptyGridError(ValueError):
    """Raised when an operation needs at least one active voxel or tile."""


def bit_of_local(x: int, y: int, z: int) -> int:
    return (x << 6) | (y << 3) | z


def local_of_bit(bit: int) -> tuple[int, int, int]:
    return bit >> 6, (bit >> 3) & 7, bit & 7


@dataclass(frozen=True, eq=False)
class GridTransform:
    """Affine index->world map: world = origin + index * voxel_size."""

    voxel_size: np.ndarray
    origin: np.ndarray

    def __init__(self, voxel_size=1.0, origin=(0.0, 0.0, 0.0)):
        vs = np.broadcast_to(np.asarray(voxel_size, np.float64), (3,)).copy()
        if not np.all(vs > 0.0):
            raise ValueError(f"voxel_size must be positive, got {vs}")
        object.__setattr__(self, "voxel_size", vs)
        object.__setattr__(self, "origin", np.asarray(origin, np.float64).reshape(3).copy())

    def index_to_world(self, index) -> np.ndarray:
        return self.origin + np.asarray(index, np.float64) * self.voxel_size

    def world_to_index_coords(self, pos) -> np.ndarray:
        return (np.asarray(pos, np.float64) - self.origin) / self.voxel_size

    def world_to_index(self, pos) -> np.ndarray:
        # floor division: each voxel owns [index, index+1) along every axis
        return np.floor(self.world_to_index_coords(pos)).astype(np.int64)

    def same_as(self, other: "GridTransform") -> bool:
        return np.array_equal(self.voxel_size, other.voxel_size) and np.array_equal(
            self.origin, other.origin
        )


class LeafNode:
    """8^3 voxel block with an activity bitmask and dense value storage."""

    __slots__ = ("origin", "value_mask", "values")

    def __init__(self, origin, background: float = 0.0):
        ox, oy, oz = (int(v) for v in origin)
        if ox % LEAF_SPAN or oy % LEAF_SPAN or oz % LEAF_SPAN:
            raise ValueError(f"leaf origin must be a multiple of {LEAF_SPAN}: {origin}")
        self.origin = (ox, oy, oz)
        self.value_mask = np.zeros(LEAF_VOXELS, dtype=bool)
        self.values = np.full(LEAF_VOXELS, np.float32(background), dtype=np.float32)

    def active_count(self) -> int:
        return int(np.count_nonzero(self.value_mask))

    def is_dense(self) -> bool:
        return self.active_count() == LEAF_VOXELS

    def set_local(self, local, value: float) -> None:
        bit = bit_of_local(*local)
        self.value_mask[bit] = True
        self.values[bit] = np.float32(value)

    def get_local(self, local) -> tuple[float, bool]:
        bit = bit_of_local(*local)
        return float(self.values[bit]), bool(self.value_mask[bit])

    def mask3d(self) -> np.ndarray:
        return self.value_mask.reshape(LEAF_EDGE, LEAF_EDGE, LEAF_EDGE)

    def values3d(self) -> np.ndarray:
        return self.values.reshape(LEAF_EDGE, LEAF_EDGE, LEAF_EDGE)

    def active_bits(self) -> np.ndarray:
        return np.flatnonzero(self.value_mask)


def active_voxel_iter(leaf: LeafNode):
    """Yield (local_index, value) for active voxels in ZYX bit order."""
    values = leaf.values
    for bit in leaf.active_bits():
        yield local_of_bit(int(bit)), float(values[bit])


class InternalNode:
    """Internal tree node: per-slot subtree (child) or constant tile."""

    __slots__ = ("origin", "fanout", "child_span", "children", "tiles")

    def __init__(self, origin, fanout: int, child_span: int):
        self.origin = tuple(int(v) for v in origin)
        self.fanout = fanout
        self.child_span = child_span
        self.children: dict[int, object] = {}
        self.tiles: dict[int, float] = {}

    def slot_of_index(self, index) -> int:
        cx = (index[0] - self.origin[0]) // self.child_span
        cy = (index[1] - self.origin[1]) // self.child_span
        cz = (index[2] - self.origin[2]) // self.child_span
        return (cx * self.fanout + cy) * self.fanout + cz

    def slot_origin(self, slot: int) -> tuple[int, int, int]:
        cz = slot % self.fanout
        cy = (slot // self.fanout) % self.fanout
        cx = slot // (self.fanout * self.fanout)
        return (
            self.origin[0] + cx * self.child_span,
            self.origin[1] + cy * self.child_span,
            self.origin[2] + cz * self.child_span,
        )

    def set_tile(self, slot: int, value: float) -> None:
        if slot in self.children:
            raise ValueError("slot already holds a subtree; cannot become a tile")
        self.tiles[slot] = float(np.float32(value))  # scalar storage is 32-bit


def _floor_multiple(v: int, span: int) -> int:
    return (v // span) * span


class SparseGrid:
    """Sparse scalar volume: top-node map, transform, background value.

    Mutating operations are meant for single-writer construction; after
    that the grid is treated as immutable and is safe to share across
    threads for read-only traversal. Derived lookups (sorted leaf list,
    tile list, bounds) are cached and invalidated by a version counter.
    """

    def __init__(self, transform: GridTransform | None = None,
                 background: float = 0.0, name: str = ""):
        self.transform = transform if transform is not None else GridTransform()
        self.background = float(background)
        self.name = name
        self.roots: dict[tuple[int, int, int], InternalNode] = {}
        self._version = 0
        self._cache: dict = {}

    # -- construction ------------------------------------------------

    def _touch(self) -> None:
        self._version += 1
        self._cache.clear()

    def _root_for(self, index, create: bool) -> InternalNode | None:
        key = tuple(_floor_multiple(int(v), L5_SPAN) for v in index)
        node = self.roots.get(key)
        if node is None and create:
            node = InternalNode(key, L5_FANOUT, L4_SPAN)
            self.roots[key] = node
        return node

    def _level4_for(self, index, create: bool) -> InternalNode | None:
        top = self._root_for(index, create)
        if top is None:
            return None
        slot = top.slot_of_index(index)
        if slot in top.tiles:
            raise ValueError("index lies inside a constant tile; voxel writes not allowed")
        node = top.children.get(slot)
        if node is None and create:
            node = InternalNode(top.slot_origin(slot), L4_FANOUT, LEAF_SPAN)
            top.children[slot] = node
        return node

    def get_or_create_leaf(self, index) -> LeafNode:
        mid = self._level4_for(index, create=True)
        slot = mid.slot_of_index(index)
        if slot in mid.tiles:
            raise ValueError("index lies inside a constant tile; voxel writes not allowed")
        leaf = mid.children.get(slot)
        if leaf is None:
            leaf = LeafNode(mid.slot_origin(slot), self.background)
            mid.children[slot] = leaf
        self._touch()
        return leaf

    def set_voxel(self, index, value: float) -> None:
        index = tuple(int(v) for v in index)
        leaf = self.get_or_create_leaf(index)
        local = tuple(index[i] - leaf.origin[i] for i in range(3))
        leaf.set_local(local, value)

    def set_tile(self, level: int, origin, value: float) -> None:
        """Install a constant tile replacing a level-3 (8^3 voxel) or
        level-4 (128^3 voxel) subtree."""
        origin = tuple(int(v) for v in origin)
        if level == 3:
            span = LEAF_SPAN
            parent = self._level4_for(origin, create=True)
        elif level == 4:
            span = L4_SPAN
            parent = self._root_for(origin, create=True)
        else:
            raise ValueError(f"tile level must be 3 or 4, got {level}")
        if any(o % span for o in origin):
            raise ValueError(f"level-{level} tile origin must align to {span}: {origin}")
        parent.set_tile(parent.slot_of_index(origin), value)
        self._touch()

    # -- queries -----------------------------------------------------

    def get_voxel(self, index) -> tuple[float, bool]:
        index = tuple(int(v) for v in index)
        top = self.roots.get(tuple(_floor_multiple(v, L5_SPAN) for v in index))
        if top is None:
            return self.background, False
        slot = top.slot_of_index(index)
        if slot in top.tiles:
            return top.tiles[slot], True
        mid = top.children.get(slot)
        if mid is None:
            return self.background, False
        slot = mid.slot_of_index(index)
        if slot in mid.tiles:
            return mid.tiles[slot], True
        leaf = mid.children.get(slot)
        if leaf is None:
            return self.background, False
        return leaf.get_local(tuple(index[i] - leaf.origin[i] for i in range(3)))

    def leaves(self) -> list[LeafNode]:
        """All allocated leaves, sorted lexicographically by origin."""
        cached = self._cache.get("leaves")
        if cached is None:
            out = []
            for top in self.roots.values():
                for mid in top.children.values():
                    out.extend(mid.children.values())
            out.sort(key=lambda lf: lf.origin)
            self._cache["leaves"] = cached = out
        return cached

    def tiles(self) -> list[tuple[tuple[int, int, int], tuple[int, int, int], float, int]]:
        """All tiles as (index_min, index_max_exclusive, value, level),
        sorted lexicographically by index_min."""
        cached = self._cache.get("tiles")
        if cached is None:
            out = []
            for top in self.roots.values():
                for slot, value in top.tiles.items():
                    lo = top.slot_origin(slot)
                    out.append((lo, tuple(v + L4_SPAN for v in lo), value, 4))
                for mid in top.children.values():
                    for slot, value in mid.tiles.items():
                        lo = mid.slot_origin(slot)
                        out.append((lo, tuple(v + LEAF_SPAN for v in lo), value, 3))
            out.sort(key=lambda t: t[0])
            self._cache["tiles"] = cached = out
        return cached

    def is_empty(self) -> bool:
        return not any(leaf.active_count() for leaf in self.leaves()) and not self.tiles()

    def active_voxel_count(self) -> int:
        n = sum(leaf.active_count() for leaf in self.leaves())
        n += sum(
            (hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2])
            for lo, hi, _, _ in self.tiles()
        )
        return n

    def index_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Tight integer bounds (min, max_exclusive) over active data."""
        cached = self._cache.get("index_bounds")
        if cached is not None:
            return cached
        lo = np.full(3, np.iinfo(np.int64).max, np.int64)
        hi = np.full(3, np.iinfo(np.int64).min, np.int64)
        for leaf in self.leaves():
            bits = leaf.active_bits()
            if bits.size == 0:
                continue
            locs = np.stack([bits >> 6, (bits >> 3) & 7, bits & 7], axis=1)
            org = np.asarray(leaf.origin, np.int64)
            lo = np.minimum(lo, org + locs.min(axis=0))
            hi = np.maximum(hi, org + locs.max(axis=0) + 1)
        for tlo, thi, _, _ in self.tiles():
            lo = np.minimum(lo, np.asarray(tlo, np.int64))
            hi = np.maximum(hi, np.asarray(thi, np.int64))
        if np.any(hi <= lo):
            raise EmptyGridError("grid has no active voxels or tiles")
        self._cache["index_bounds"] = (lo, hi)
        return lo, hi

    def world_aabb(self) -> tuple[np.ndarray, np.ndarray]:
        """Tight world-space box over all active voxel and tile extents."""
        lo, hi = self.index_bounds()
        return self.transform.index_to_world(lo), self.transform.index_to_world(hi)


def structural_equal(a: SparseGrid, b: SparseGrid) -> bool:
    """Full structural comparison: transform, background, masks, values, tiles."""
    if not a.transform.same_as(b.transform):
        return False
    if np.float32(a.background) != np.float32(b.background) or a.name != b.name:
        return False
    la, lb = a.leaves(), b.leaves()
    if len(la) != len(lb):
        return False
    for x, y in zip(la, lb):
        if x.origin != y.origin:
            return False
        if not np.array_equal(x.value_mask, y.value_mask):
            return False
        if not np.array_equal(x.values, y.values):
            return False
    return a.tiles() == b.tiles()


def validate(grid: SparseGrid) -> None:
    """Check tree invariants; raises AssertionError on violation."""
    for top_origin, top in grid.roots.items():
        assert all(v % L5_SPAN == 0 for v in top_origin)
        assert not (set(top.children) & set(top.tiles)), "slot is both child and tile"
        for slot, mid in top.children.items():
            assert mid.origin == top.slot_origin(slot)
            assert not (set(mid.children) & set(mid.tiles))
            subtree_active = sum(leaf.active_count() for leaf in mid.children.values())
            assert subtree_active + len(mid.tiles) > 0, "allocated subtree with no active data"
            for lslot, leaf in mid.children.items():
                assert leaf.origin == mid.slot_origin(lslot)
                assert leaf.active_count() > 0, "allocated leaf with empty mask"
