"""Batch entry points: generate test volumes, fit Gaussian models, render
frames and compare renderers.

    gaussvol gen --kind gaussian_blob --dims 64 --out blob.svol
    gaussvol fit --in blob.svol --lod 3 --out blob.ggm
    gaussvol render --model blob.ggm --out blob.ppm --tf jet --res 512x512
    gaussvol compare --model blob.ggm --grid blob.svol --res 256x256

All randomness is seeded (--seed, default 0); identical invocations
produce identical output bytes.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from .camera import frame_scene, parse_wire
from .compare import CSV_HEADER, GAUSS_LATTICE_SCALE, compare_renderers, render_gauss_frame
from .fitting import LodConfig, fit_grid, fit_points, fit_stack, read_ggm, write_ggm
from .imaging import builtin_tf, write_ppm
from .ingest import (
    AmrStack,
    build_point_grid,
    gen_synthetic,
    mask_refined,
    parse_xyz,
    read_svol,
    write_svol,
)
from .tracer import TraceConfig, TraceStats, build_bvh


def _parse_res(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None


def _parse_rgb(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected r,g,b, got {text!r}")
    return tuple(float(p) for p in parts)


def _parse_kv(pairs: list[str]) -> dict:
    out = {}
    for pair in pairs:
        key, _, value = pair.partition("=")
        out[key] = float(value)
    return out


def _lod_config(args) -> LodConfig:
    overrides = {}
    if args.opacity_threshold is not None:
        overrides["opacity_threshold"] = args.opacity_threshold
    overrides["sigma_multiplier"] = args.sigma
    if args.dense_block is not None or args.sparse is not None:
        base = LodConfig.from_lod(args.lod)
        return LodConfig(
            dense_block=args.dense_block or base.dense_block,
            sparse_strategy=args.sparse or base.sparse_strategy,
            **overrides,
        )
    return LodConfig.from_lod(args.lod, **overrides)


def cmd_gen(args) -> int:
    grid = gen_synthetic(args.kind, args.dims, _parse_kv(args.param), seed=args.seed)
    with open(args.out, "wb") as sink:
        write_svol(grid, sink)
    print(f"{grid.name}: {grid.active_voxel_count()} active voxels, "
          f"{len(grid.leaves())} leaves -> {args.out}")
    return 0


def cmd_fit(args) -> int:
    cfg = _lod_config(args)
    t0 = time.perf_counter()
    if args.points:
        points = parse_xyz(open(args.points, "r", encoding="utf-8"))
        model = fit_points(build_point_grid(points, name=args.points), cfg)
        breakdown = f"points={len(model)}"
    elif args.amr:
        levels = [read_svol(open(path, "rb")) for path in args.amr]
        stack = AmrStack(levels)
        if args.mask:
            stack = mask_refined(stack)
        model = fit_stack(stack, cfg)
        breakdown = "+".join(str(len(fit_grid(lvl, cfg)))
                             for lvl in stack.levels if not lvl.is_empty())
    else:
        grid = read_svol(open(args.input, "rb"))
        model = fit_grid(grid, cfg, workers=args.workers)
        dense = sum(1 for leaf in grid.leaves() if leaf.is_dense())
        sparse = len(grid.leaves()) - dense
        breakdown = (f"dense_leaves={dense} sparse_leaves={sparse} "
                     f"tiles={len(grid.tiles())}")
    elapsed = time.perf_counter() - t0
    with open(args.out, "wb") as sink:
        write_ggm(model, sink)
    print(f"{len(model)} gaussians (lod {model.lod.lod_label()}, "
          f"block {cfg.dense_block}, {cfg.sparse_strategy}) in {elapsed:.2f}s "
          f"[{breakdown}] -> {args.out}")
    return 0


def cmd_render(args) -> int:
    model = read_ggm(open(args.model, "rb"))
    camera = parse_wire(args.camera) if args.camera else frame_scene(model.scene_aabb)
    tf = builtin_tf(args.tf, args.blend_bg)
    cfg = TraceConfig(kappa=args.kappa)
    width, height = args.res
    bvh = build_bvh(model)
    stats = TraceStats()
    image, ms = render_gauss_frame(model, bvh, camera, tf, cfg, width, height,
                                   bg=args.bg, frames=args.frames, stats=stats)
    with open(args.out, "wb") as sink:
        write_ppm(image, sink)
    print(f"{width}x{height} frame in {ms:.1f} ms/frame "
          f"(candidates={stats.candidates}, hits={stats.accepted_hits}, "
          f"overflows={stats.hit_buffer_overflows}) -> {args.out}")
    return 0


def cmd_compare(args) -> int:
    model = read_ggm(open(args.model, "rb"))
    grid = read_svol(open(args.grid, "rb"))
    camera = parse_wire(args.camera) if args.camera else None
    tf = builtin_tf(args.tf, args.blend_bg)
    cfg = TraceConfig(kappa=args.kappa)
    width, height = args.res
    result = compare_renderers(grid, model, tf, cfg, width, height,
                               camera=camera, bg=args.bg,
                               density_scale=args.density_scale,
                               frames=args.frames)
    print(CSV_HEADER)
    print(result.csv_row())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as sink:
            sink.write(CSV_HEADER + "\n" + result.csv_row() + "\n")
    if args.dump_images:
        for tag, image in (("gauss", result.gauss_image),
                           ("ref", result.reference_image)):
            with open(f"{args.dump_images}.{tag}.ppm", "wb") as sink:
                write_ppm(image, sink)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaussvol")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for any randomized step (default 0)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a procedural volume as SVOL")
    p.add_argument("--kind", required=True,
                   choices=("sphere_shell", "gaussian_blob", "checker", "wavelet_like"))
    p.add_argument("--dims", type=int, default=64)
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("fit", help="fit a Gaussian model, write GGM")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--in", dest="input", help="SVOL volume")
    src.add_argument("--points", help=".xyz particle file")
    src.add_argument("--amr", nargs="+", help="SVOL files, coarse to fine")
    p.add_argument("--mask", action="store_true",
                   help="mask coarse AMR voxels covered by finer levels")
    p.add_argument("--lod", type=int, default=1, choices=range(1, 6))
    p.add_argument("--dense-block", type=int, choices=(2, 4, 8))
    p.add_argument("--sparse", choices=("smart", "strict", "single"))
    p.add_argument("--sigma", type=int, default=2, choices=(1, 2, 3))
    p.add_argument("--opacity-threshold", type=float)
    p.add_argument("--workers", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("render", help="render a GGM model to PPM")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tf", default="gray", choices=("gray", "jet", "bluewhite"))
    p.add_argument("--blend-bg", action="store_true")
    p.add_argument("--bg", type=_parse_rgb, default=(0.0, 0.0, 0.0))
    p.add_argument("--res", type=_parse_res, default=(256, 256))
    p.add_argument("--camera", help="px,py,pz,lx,ly,lz,ux,uy,uz,fov_deg")
    p.add_argument("--kappa", type=float, default=0.01)
    p.add_argument("--frames", type=int, default=1)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("compare", help="PSNR/timing row: Gaussian vs reference")
    p.add_argument("--model", required=True)
    p.add_argument("--grid", required=True)
    p.add_argument("--tf", default="gray", choices=("gray", "jet", "bluewhite"))
    p.add_argument("--blend-bg", action="store_true")
    p.add_argument("--bg", type=_parse_rgb, default=(0.0, 0.0, 0.0))
    p.add_argument("--res", type=_parse_res, default=(256, 256))
    p.add_argument("--camera")
    p.add_argument("--kappa", type=float, default=0.01)
    p.add_argument("--density-scale", type=float, default=GAUSS_LATTICE_SCALE,
                   help="reference optical-depth scale (default aligns the "
                        "two renderers' mean density)")
    p.add_argument("--frames", type=int, default=16,
                   help="frames for the ms/frame median")
    p.add_argument("--out", help="also write the CSV to this file")
    p.add_argument("--dump-images", metavar="PREFIX",
                   help="write PREFIX.gauss.ppm and PREFIX.ref.ppm")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    np.random.seed(args.seed % 2 ** 32)  # belt and braces; paths use default_rng
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
