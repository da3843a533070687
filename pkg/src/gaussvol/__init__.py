"""gaussvol: axis-aligned 3D Gaussian models of sparse voxel volumes,
rendered by analytic per-ray line integration and validated against a
boundary-exact voxel ray marcher."""

from .camera import Camera, frame_scene, parse_wire
from .fitting import (
    Gaussian,
    GaussianModel,
    LodConfig,
    fit_dense_leaf,
    fit_grid,
    fit_points,
    fit_sparse_single,
    fit_sparse_smart,
    fit_sparse_strict,
    fit_stack,
    gaussian_aabb,
    read_ggm,
    write_ggm,
)
from .grid import EmptyGridError, GridTransform, LeafNode, SparseGrid
from .imaging import (
    Film,
    TransferFunction,
    builtin_tf,
    psnr,
    read_ppm,
    tf_bluewhite,
    tf_grayscale,
    tf_jet,
    tonemap_8bit,
    write_ppm,
)
from .ingest import (
    AmrStack,
    PointGrid,
    PointSet,
    build_point_grid,
    gen_synthetic,
    import_raw_dense,
    mask_refined,
    parse_xyz,
    read_svol,
    write_svol,
)
from .reference import MarchConfig, dda_march, render_reference
from .tracer import (
    Bvh,
    HitInterval,
    Ray,
    TraceConfig,
    TraceStats,
    build_bvh,
    intersect_ray_gaussian,
    line_integral,
    render,
    shade,
    trace_ray,
)

__version__ = "0.1.0"
