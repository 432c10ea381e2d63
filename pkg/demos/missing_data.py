"""Satellite rasters arrive with holes; averaging has to cope.

We punch random missing-pixel holes into drifting frames, then look at
three things. The coverage map counts how often each pixel was observed.
The arithmetic mean normalizes by that count, so a pixel seen once keeps
its value instead of being diluted. The transport average treats missing
pixels as zero-mass and relies on its marginal relaxation to absorb them.

Run from the repository root:  python3 demos/missing_data.py
"""

import pathlib

import numpy as np

from gasbary.cost import CostSpec, build_cost, kernel_from_cost
from gasbary.grid import GridImage, total_mass
from gasbary.ingest import coverage_map, write_grid
from gasbary.ot_solver import SolverConfig, barycenter
from gasbary.render import render_grid
from gasbary.synthetic import Drift, ScenarioSpec, arithmetic_mean, generate

OUT = pathlib.Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

n, frames = 16, 5
rng = np.random.default_rng(4)

full = generate(ScenarioSpec(n=n, frames=frames,
                             kind=Drift(step=1.0, direction=(0.0, -1.0))))
holey = []
for img in full:
    mask = rng.random(n * n) > 0.35  # drop roughly a third of each frame
    holey.append(GridImage(n, np.where(mask, img.values, 0.0), mask))
    write_grid(holey[-1], OUT / f"holey_{len(holey) - 1}.grid")

cov = coverage_map(holey)
print(f"coverage: min {cov.min()}, max {cov.max()} of {frames} frames")
render_grid(GridImage.full(n, cov.astype(float)), OUT / "coverage.ppm")

mean = arithmetic_mean(holey)
print(f"count-normalized mean mass {total_mass(mean):.3f} "
      f"(each full frame carries 1.0)")
print(f"pixels never observed: {(~mean.mask).sum()}")
render_grid(mean, OUT / "holey_mean.ppm")

lam = 0.1
K = kernel_from_cost(build_cost(CostSpec.euclidean(), n), lam)
res = barycenter(holey, [K] * frames, None,
                 SolverConfig(lam=lam, lam_u=10.0, tol=1e-6))
print(f"barycenter on masked inputs: converged={res.converged}, "
      f"mass {res.g_bar.sum():.3f}")
render_grid(GridImage.full(n, res.g_bar), OUT / "holey_barycenter.ppm")
print(f"wrote {OUT}/coverage.ppm and {OUT}/holey_*.ppm")
