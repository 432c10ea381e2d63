"""A source seen at different times appears in different places.

Eight frames watch a Gaussian plume whose center walks a radius-5 circle.
The per-pixel arithmetic mean smears the plume into a ring, so the actual
source location carries almost no mass. A transport-based average instead
pays for moving mass and concentrates it back onto the center.

Run from the repository root:  python3 demos/rotating_scene.py
Outputs land in demos/out/.
"""

import pathlib
import time

import numpy as np

from gasbary.cost import CostSpec, build_cost, kernel_from_cost
from gasbary.grid import GridImage, centroid_of, pixel_rows_cols
from gasbary.ot_solver import SolverConfig, barycenter
from gasbary.render import render_grid
from gasbary.synthetic import Rotate, ScenarioSpec, arithmetic_mean, generate

OUT = pathlib.Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

n, frames, radius, lam = 32, 8, 5.0, 0.1

print(f"generating {frames} frames, blob circling at radius {radius} on a "
      f"{n}x{n} grid")
imgs = generate(ScenarioSpec(n=n, frames=frames, kind=Rotate(radius=radius)))
for k in (0, 2):
    r, c = centroid_of(imgs[k].values, n)
    print(f"  frame {k}: centroid ({r:.2f}, {c:.2f})")

mean = arithmetic_mean(imgs)
render_grid(mean, OUT / "rotating_mean.ppm")

K = kernel_from_cost(build_cost(CostSpec.euclidean(), n), lam)
t0 = time.time()
res = barycenter(imgs, [K] * frames, None,
                 SolverConfig(lam=lam, lam_u=100.0, tol=1e-6))
print(f"barycenter solved in {time.time() - t0:.1f}s, "
      f"{res.iterations} iterations, converged={res.converged}")
render_grid(GridImage.full(n, res.g_bar), OUT / "rotating_barycenter.ppm")
render_grid(imgs[0], OUT / "rotating_frame0.ppm")

rows, cols = pixel_rows_cols(n)
near = np.hypot(rows - 16.5, cols - 16.5) <= 3.0


def frac(v):
    return float(v[near].sum() / v.sum())


print(f"mass within 3 px of the center: "
      f"mean {frac(mean.values):.1%} vs barycenter {frac(res.g_bar):.1%}")
r, c = centroid_of(res.g_bar, n)
print(f"barycenter centroid ({r:.3f}, {c:.3f}); grid center (16.5, 16.5)")
print(f"wrote {OUT}/rotating_*.ppm")
