"""Ray tracing of axis-aligned Gaussian models.

A Gaussian contributes unnormalized density exp(-(x-c)^T S^-1 (x-c)) with
S = diag(radius^2). A ray r(t) = o + t*d (unit d) overlaps the Gaussian's
support where the density exceeds the threshold kappa, i.e. where

    C t^2 + B t + A + log(kappa) <= 0,
    C = d^T S^-1 d,  B = 2 d^T S^-1 (o - c),  A = (o - c)^T S^-1 (o - c).

The optical-depth contribution over [t0, t1] has a closed form: after the
whitening substitution y = (x - c) / radius the exponent is |p + t q|^2
(p, q the whitened origin/direction), which integrates to an erf
difference.

Rendering collects all ray/Gaussian overlap intervals through a binned
SAH BVH over the per-Gaussian sigma boxes, sorts them by entry distance,
and accumulates contributions front to back with an optional early break
once the accumulated depth saturates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf as _erf_vec

from .fitting import Gaussian, GaussianModel
from .imaging import Film, TransferFunction

SQRT_PI = math.sqrt(math.pi)
LOW_BREAK_T = 1e-3  # optional faint-ray break threshold
_DIR_TOL = 1e-6


class DegenerateDirectionError(ValueError):
    pass


class EmptyModelError(ValueError):
    pass


@dataclass
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    t_min: float = 0.0
    t_max: float = math.inf

    def __post_init__(self):
        self.origin = np.asarray(self.origin, np.float64).reshape(3)
        self.direction = np.asarray(self.direction, np.float64).reshape(3)
        if self.t_min > self.t_max:
            raise ValueError("t_min must not exceed t_max")


@dataclass(frozen=True)
class HitInterval:
    gaussian_index: int
    t_entry: float
    t_exit: float


@dataclass(frozen=True)
class TraceConfig:
    kappa: float = 0.01
    early_exit_high: float = 0.999
    max_hits_per_ray: int = 4096
    paper_low_break: bool = False

    def __post_init__(self):
        if not 0.0 < self.kappa < 1.0:
            raise ValueError("kappa must lie in (0, 1)")
        if self.max_hits_per_ray < 1:
            raise ValueError("max_hits_per_ray must be >= 1")


@dataclass
class TraceStats:
    """Per-render instrumentation counters."""

    rays: int = 0
    candidates: int = 0      # (ray, gaussian) pairs whose sigma box was hit
    accepted_hits: int = 0   # pairs whose support quadratic was hit
    hit_buffer_overflows: int = 0  # rays whose hit list was truncated


def _check_unit(direction: np.ndarray) -> None:
    n = float(np.linalg.norm(direction))
    if abs(n - 1.0) > _DIR_TOL:
        raise DegenerateDirectionError(f"|direction| = {n}, expected 1")


# -- analytic primitives ---------------------------------------------------

def _support_quadratic(o, d, centers, radii, kappa):
    """Vectorized entry/exit of rays against Gaussian supports.

    All arguments broadcast; returns (hit, t_entry, t_exit) with misses
    decided by a negative discriminant.
    """
    p = (o - centers) / radii
    q = d / radii
    big_c = np.sum(q * q, axis=-1)
    big_b = 2.0 * np.sum(p * q, axis=-1)
    big_a = np.sum(p * p, axis=-1)
    k = big_a + math.log(kappa)
    disc = big_b * big_b - 4.0 * big_c * k
    hit = disc >= 0.0
    sq = np.sqrt(np.where(hit, disc, 0.0))
    # Citardauq split keeps the subtraction cancellation-free
    qq = -0.5 * (big_b + np.copysign(sq, big_b))
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = qq / big_c
        r2 = np.where(qq != 0.0, k / np.where(qq != 0.0, qq, 1.0), r1)
    t_entry = np.minimum(r1, r2)
    t_exit = np.maximum(r1, r2)
    return hit, t_entry, t_exit


def intersect_ray_gaussian(ray: Ray, g: Gaussian, kappa: float) -> HitInterval | None:
    """Entry/exit parameters of the ray through the Gaussian's kappa
    support, clipped to the ray's active segment; None on a miss."""
    if not 0.0 < kappa < 1.0:
        raise ValueError("kappa must lie in (0, 1)")
    _check_unit(ray.direction)
    hit, t0, t1 = _support_quadratic(
        ray.origin, ray.direction,
        np.asarray(g.center, np.float64), np.asarray(g.radius, np.float64), kappa,
    )
    if not bool(hit):
        return None
    t0, t1 = float(t0), float(t1)
    if t1 < ray.t_min or t0 > ray.t_max:
        return None
    return HitInterval(0, max(t0, ray.t_min), min(t1, ray.t_max))


def _line_integral_batch(o, d, centers, radii, opacities, t0, t1):
    """Closed-form density integral along segments, vectorized."""
    p = (o - centers) / radii
    q = d / radii
    qn = np.sqrt(np.sum(q * q, axis=-1))
    m = np.sum(p * q, axis=-1) / qn
    perp = np.maximum(np.sum(p * p, axis=-1) - m * m, 0.0)
    s0 = qn * t0 + m
    s1 = qn * t1 + m
    return opacities * np.exp(-perp) * (SQRT_PI / 2.0) * (_erf_vec(s1) - _erf_vec(s0)) / qn


def line_integral(ray: Ray, g: Gaussian, t0: float, t1: float) -> float:
    """Optical-depth contribution of one Gaussian over [t0, t1]."""
    if t0 > t1:
        raise ValueError("t0 must not exceed t1")
    if t0 == t1:
        return 0.0
    center = np.asarray(g.center, np.float64)
    radius = np.asarray(g.radius, np.float64)
    p = (ray.origin - center) / radius
    q = ray.direction / radius
    qn = float(np.linalg.norm(q))
    m = float(np.dot(p, q)) / qn
    perp = max(float(np.dot(p, p)) - m * m, 0.0)
    s0 = qn * t0 + m
    s1 = qn * t1 + m
    return g.opacity * math.exp(-perp) * (SQRT_PI / 2.0) * (math.erf(s1) - math.erf(s0)) / qn


# -- bounding volume hierarchy ---------------------------------------------

@dataclass
class Bvh:
    """Binary BVH stored as flat arrays; leaves reference a permutation of
    Gaussian indices."""

    node_min: np.ndarray    # (M, 3)
    node_max: np.ndarray    # (M, 3)
    node_a: np.ndarray      # internal: left child; leaf: offset into prim_order
    node_b: np.ndarray      # internal: right child; leaf: primitive count
    node_is_leaf: np.ndarray
    prim_order: np.ndarray  # permutation of range(N)

    def __len__(self) -> int:
        return len(self.node_min)


_SAH_BINS = 16
_LEAF_SIZE = 4


def build_bvh(model: GaussianModel, leaf_size: int = _LEAF_SIZE) -> Bvh:
    """Binned surface-area-heuristic build over the per-Gaussian boxes."""
    n = len(model)
    if n == 0:
        raise EmptyModelError("cannot build a BVH over an empty model")
    lo = model.aabbs[:, :3]
    hi = model.aabbs[:, 3:]
    centroids = (lo + hi) * 0.5

    node_min, node_max, node_a, node_b, node_leaf = [], [], [], [], []
    order = np.arange(n)

    def half_area(bmin, bmax):
        e = np.maximum(bmax - bmin, 0.0)
        return e[..., 0] * e[..., 1] + e[..., 1] * e[..., 2] + e[..., 2] * e[..., 0]

    def new_node(idx):
        node_min.append(lo[idx].min(axis=0))
        node_max.append(hi[idx].max(axis=0))
        node_a.append(0)
        node_b.append(0)
        node_leaf.append(False)
        return len(node_min) - 1

    leaves: list[tuple[int, np.ndarray]] = []
    stack = [(new_node(order), order)]
    while stack:
        nid, idx = stack.pop()
        if len(idx) <= leaf_size:
            leaves.append((nid, idx))
            node_leaf[nid] = True
            continue
        cen = centroids[idx]
        cmin = cen.min(axis=0)
        cmax = cen.max(axis=0)
        axis = int(np.argmax(cmax - cmin))
        extent = cmax[axis] - cmin[axis]
        if extent <= 0.0:
            half = len(idx) // 2  # all centroids coincide
            left_idx, right_idx = idx[:half], idx[half:]
        else:
            bins = np.minimum(
                ((cen[:, axis] - cmin[axis]) / extent * _SAH_BINS).astype(np.int64),
                _SAH_BINS - 1,
            )
            counts = np.bincount(bins, minlength=_SAH_BINS)
            bmin = np.full((_SAH_BINS, 3), np.inf)
            bmax = np.full((_SAH_BINS, 3), -np.inf)
            for b in range(_SAH_BINS):
                sel = bins == b
                if counts[b]:
                    bmin[b] = lo[idx[sel]].min(axis=0)
                    bmax[b] = hi[idx[sel]].max(axis=0)
            lcnt = np.cumsum(counts)[:-1]
            rcnt = len(idx) - lcnt
            lmin = np.minimum.accumulate(bmin, axis=0)[:-1]
            lmax = np.maximum.accumulate(bmax, axis=0)[:-1]
            rmin = np.minimum.accumulate(bmin[::-1], axis=0)[::-1][1:]
            rmax = np.maximum.accumulate(bmax[::-1], axis=0)[::-1][1:]
            cost = np.where(
                (lcnt > 0) & (rcnt > 0),
                half_area(lmin, lmax) * lcnt + half_area(rmin, rmax) * rcnt,
                np.inf,
            )
            split = int(np.argmin(cost))
            if not np.isfinite(cost[split]):
                half = len(idx) // 2
                left_idx, right_idx = idx[:half], idx[half:]
            else:
                left_sel = bins <= split
                left_idx, right_idx = idx[left_sel], idx[~left_sel]
        left = new_node(left_idx)
        right = new_node(right_idx)
        node_a[nid] = left
        node_b[nid] = right
        stack.append((right, right_idx))
        stack.append((left, left_idx))

    prim_order = np.empty(n, np.int64)
    offset = 0
    for nid, idx in sorted(leaves):
        prim_order[offset:offset + len(idx)] = idx
        node_a[nid] = offset
        node_b[nid] = len(idx)
        offset += len(idx)
    return Bvh(np.asarray(node_min), np.asarray(node_max),
               np.asarray(node_a, np.int64), np.asarray(node_b, np.int64),
               np.asarray(node_leaf, bool), prim_order)


def _slab_overlap(o, d, t0, t1, bmin, bmax):
    """Segment/box overlap test; boxes are closed, touching counts."""
    with np.errstate(divide="ignore", invalid="ignore"):
        lo_t = (bmin - o) / d
        hi_t = (bmax - o) / d
    near = np.minimum(lo_t, hi_t)
    far = np.maximum(lo_t, hi_t)
    zero = d == 0.0
    if np.any(zero):
        inside = (o >= bmin) & (o <= bmax)
        near = np.where(zero, np.where(inside, -np.inf, np.inf), near)
        far = np.where(zero, np.where(inside, np.inf, -np.inf), far)
    enter = np.maximum(near.max(axis=-1), t0)
    exit_ = np.minimum(far.min(axis=-1), t1)
    return enter <= exit_


def _collect_hits(model: GaussianModel, bvh: Bvh, o, d, t0, t1,
                  cfg: TraceConfig, stats: TraceStats):
    """All accepted (ray, gaussian, t_entry, t_exit) records.

    A hit requires both the ray to cross the Gaussian's sigma box and its
    support quadratic to have real roots inside the ray segment; the
    interval is then clipped to the segment.
    """
    aabbs = model.aabbs
    centers = model.centers.astype(np.float64)
    radii = model.radii.astype(np.float64)
    opac = model.opacities.astype(np.float64)
    rows, prims, tents, texts, taus = [], [], [], [], []

    live = np.flatnonzero(t0 <= t1)
    if live.size:
        stack = [(0, live)]
        while stack:
            nid, rays = stack.pop()
            keep = _slab_overlap(o[rays], d[rays], t0[rays], t1[rays],
                                 bvh.node_min[nid], bvh.node_max[nid])
            rays = rays[keep]
            if rays.size == 0:
                continue
            if bvh.node_is_leaf[nid]:
                start, count = bvh.node_a[nid], bvh.node_b[nid]
                for pi in bvh.prim_order[start:start + count]:
                    boxed = _slab_overlap(o[rays], d[rays], t0[rays], t1[rays],
                                          aabbs[pi, :3], aabbs[pi, 3:])
                    cand = rays[boxed]
                    if cand.size == 0:
                        continue
                    stats.candidates += int(cand.size)
                    hit, te, tx = _support_quadratic(o[cand], d[cand],
                                                     centers[pi], radii[pi], cfg.kappa)
                    hit &= (tx >= t0[cand]) & (te <= t1[cand])
                    if not np.any(hit):
                        continue
                    sel = cand[hit]
                    te = np.maximum(te[hit], t0[sel])
                    tx = np.minimum(tx[hit], t1[sel])
                    rows.append(sel)
                    prims.append(np.full(sel.size, pi, np.int64))
                    tents.append(te)
                    texts.append(tx)
                    taus.append(_line_integral_batch(o[sel], d[sel], centers[pi],
                                                     radii[pi], opac[pi], te, tx))
                    stats.accepted_hits += int(sel.size)
            else:
                stack.append((int(bvh.node_b[nid]), rays))
                stack.append((int(bvh.node_a[nid]), rays))

    if not rows:
        empty_i = np.empty(0, np.int64)
        empty_f = np.empty(0, np.float64)
        return empty_i, empty_i, empty_f, empty_f, empty_f
    return (np.concatenate(rows), np.concatenate(prims), np.concatenate(tents),
            np.concatenate(texts), np.concatenate(taus))


def _accumulate(n_rays: int, rows, prims, tents, texts, taus,
                cfg: TraceConfig, stats: TraceStats):
    """Front-to-back accumulation with hit-buffer truncation and the
    saturation break, vectorized over all rays at once."""
    T = np.zeros(n_rays, np.float64)
    hit_any = np.zeros(n_rays, bool)
    if rows.size == 0:
        return T, hit_any
    hit_any[np.unique(rows)] = True

    order = np.lexsort((prims, tents, rows))
    rows, taus = rows[order], taus[order]

    seg_start = np.flatnonzero(np.r_[True, rows[1:] != rows[:-1]])
    counts = np.diff(np.r_[seg_start, rows.size])
    rank = np.arange(rows.size) - np.repeat(seg_start, counts)

    over = counts > cfg.max_hits_per_ray
    if np.any(over):
        stats.hit_buffer_overflows += int(np.count_nonzero(over))
        keep = rank < cfg.max_hits_per_ray
        rows, taus = rows[keep], taus[keep]
        seg_start = np.flatnonzero(np.r_[True, rows[1:] != rows[:-1]])
        counts = np.diff(np.r_[seg_start, rows.size])
        rank = np.arange(rows.size) - np.repeat(seg_start, counts)

    cum = np.cumsum(taus)
    excl = cum - taus
    excl = excl - np.repeat(excl[seg_start], counts)
    include = excl <= cfg.early_exit_high
    if cfg.paper_low_break:
        first_ok = np.repeat(taus[seg_start] >= LOW_BREAK_T, counts)
        include &= (rank == 0) | first_ok
    np.add.at(T, rows[include], taus[include])
    return T, hit_any


def trace_ray(ray: Ray, model: GaussianModel, bvh: Bvh, cfg: TraceConfig,
              stats: TraceStats | None = None) -> tuple[float, bool]:
    """Total optical depth along one ray and whether anything was hit."""
    _check_unit(ray.direction)
    stats = stats if stats is not None else TraceStats()
    stats.rays += 1
    o = ray.origin[None, :]
    d = ray.direction[None, :]
    scene_hit = _slab_overlap(o, d, np.array([ray.t_min]), np.array([ray.t_max]),
                              model.scene_aabb[:3], model.scene_aabb[3:])
    if not bool(scene_hit[0]):
        return 0.0, False
    t0, t1 = _clip_to_box(o, d, np.array([ray.t_min]), np.array([ray.t_max]),
                          model.scene_aabb)
    records = _collect_hits(model, bvh, o, d, t0, t1, cfg, stats)
    T, hit_any = _accumulate(1, *records, cfg, stats)
    return float(T[0]), bool(hit_any[0])


def _clip_to_box(o, d, t0, t1, box):
    with np.errstate(divide="ignore", invalid="ignore"):
        lo_t = (box[:3] - o) / d
        hi_t = (box[3:] - o) / d
    near = np.minimum(lo_t, hi_t)
    far = np.maximum(lo_t, hi_t)
    zero = d == 0.0
    if np.any(zero):
        inside = (o >= box[:3]) & (o <= box[3:])
        near = np.where(zero, np.where(inside, -np.inf, np.inf), near)
        far = np.where(zero, np.where(inside, np.inf, -np.inf), far)
    return np.maximum(near.max(axis=-1), t0), np.minimum(far.min(axis=-1), t1)


def shade(T: float, hit_any: bool, tf: TransferFunction, bg) -> tuple[float, float, float]:
    """Map accumulated optical depth to a color: visibility 1 - exp(-T)
    through the transfer function when anything was hit, else background."""
    if not hit_any or T <= 0.0:
        return tuple(float(c) for c in bg)
    v = 1.0 - math.exp(-T)
    color = tf(v)
    if tf.blend_background:
        return tuple(float(b) * (1.0 - v) + float(c) * v for b, c in zip(bg, color))
    return color


def shade_batch(T: np.ndarray, hit_any: np.ndarray, tf: TransferFunction, bg) -> np.ndarray:
    bg = np.asarray(bg, np.float64).reshape(3)
    v = 1.0 - np.exp(-T)
    colors = tf.eval_batch(v)
    if tf.blend_background:
        colors = bg * (1.0 - v[:, None]) + colors * v[:, None]
    miss = ~hit_any | (T <= 0.0)
    colors[miss] = bg
    return colors


def trace_batch(model: GaussianModel, bvh: Bvh, origins, dirs,
                cfg: TraceConfig, stats: TraceStats | None = None
                ) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized trace of many rays (t range [0, inf) each)."""
    stats = stats if stats is not None else TraceStats()
    n = len(origins)
    stats.rays += n
    zeros = np.zeros(n)
    infs = np.full(n, math.inf)
    t0, t1 = _clip_to_box(origins, dirs, zeros, infs, model.scene_aabb)
    records = _collect_hits(model, bvh, origins, dirs, t0, t1, cfg, stats)
    return _accumulate(n, *records, cfg, stats)


def render(model: GaussianModel, bvh: Bvh, camera, film: Film,
           tf: TransferFunction, cfg: TraceConfig, bg=(0.0, 0.0, 0.0),
           jitter_rng=None, stats: TraceStats | None = None) -> TraceStats:
    """Accumulate one subframe (one primary ray per pixel) into the film."""
    stats = stats if stats is not None else TraceStats()
    origins, dirs = camera.rays(film.width, film.height, jitter_rng)
    T, hit_any = trace_batch(model, bvh, origins, dirs, cfg, stats)
    colors = shade_batch(T, hit_any, tf, bg)
    film.accumulate(colors.reshape(film.height, film.width, 3))
    return stats
