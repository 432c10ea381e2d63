"""Transport-based temporal averaging of gridded gas concentration images.

Sparse plumes move between frames, so pixelwise averaging smears them into
halos. This package instead averages with unbalanced entropic optimal
transport: a barycenter under a movement cost (optionally wind-biased, with a
per-image cost matrix) concentrates recurring emissions back onto their
sources while tolerating missing pixels and mass fluctuations.
"""

from .cost import (
    CapacityError,
    CostMatrix,
    CostSpec,
    KernelMatrix,
    apply_kernel,
    build_cost,
    kernel_from_cost,
    streaming_kernel,
)
from .grid import (
    GridImage,
    ImageMeta,
    PixelPosition,
    centroid,
    centroid_of,
    flatten,
    pixel_position,
    total_mass,
    unflatten,
)
from .ingest import (
    WindRecord,
    WindroseHistogram,
    coverage_map,
    crop_to_square,
    mean_wind,
    parse_grid,
    read_wind_csv,
    windrose,
    write_grid,
)
from .ot_solver import (
    BarycenterResult,
    SolverConfig,
    TransportResult,
    barycenter,
    entropy,
    kl_divergence,
    objective_unbalanced,
    sinkhorn_balanced,
    sinkhorn_unbalanced,
    solver_objective,
)
from .render import render_grid, render_windrose, write_ppm
from .synthetic import Drift, Rotate, ScenarioSpec, arithmetic_mean, generate

__version__ = "0.1.0"

__all__ = [
    "BarycenterResult",
    "CapacityError",
    "CostMatrix",
    "CostSpec",
    "Drift",
    "GridImage",
    "ImageMeta",
    "KernelMatrix",
    "PixelPosition",
    "Rotate",
    "ScenarioSpec",
    "SolverConfig",
    "TransportResult",
    "WindRecord",
    "WindroseHistogram",
    "apply_kernel",
    "arithmetic_mean",
    "barycenter",
    "build_cost",
    "centroid",
    "centroid_of",
    "coverage_map",
    "crop_to_square",
    "entropy",
    "flatten",
    "generate",
    "kernel_from_cost",
    "kl_divergence",
    "mean_wind",
    "objective_unbalanced",
    "parse_grid",
    "pixel_position",
    "read_wind_csv",
    "render_grid",
    "render_windrose",
    "sinkhorn_balanced",
    "sinkhorn_unbalanced",
    "solver_objective",
    "streaming_kernel",
    "total_mass",
    "unflatten",
    "windrose",
    "write_grid",
    "write_ppm",
]
