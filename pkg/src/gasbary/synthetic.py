"""Deterministic synthetic scenes: isotropic Gaussian blobs whose mean either
rotates around the grid center or drifts along a fixed direction, plus the
missing-aware arithmetic mean used as the baseline everywhere."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridImage, ImageMeta, pixel_rows_cols

# pixel area covered by the grid: centers 1..n, half-pixel margin each side
_LO = 0.5


@dataclass(frozen=True)
class Rotate:
    """Mean moves on a circle of the given radius around the grid center."""

    radius: float

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise ValueError("radius must be positive")


@dataclass(frozen=True)
class Drift:
    """Mean starts at the center and moves step pixels per frame along
    direction, given as (east, north) components of a unit vector."""

    step: float
    direction: tuple[float, float]

    def __post_init__(self) -> None:
        if not self.step > 0:
            raise ValueError("step must be positive")
        d = np.asarray(self.direction, dtype=np.float64)
        if d.shape != (2,) or abs(float(np.hypot(d[0], d[1])) - 1.0) > 1e-6:
            raise ValueError("direction must be a unit 2-vector (east, north)")


@dataclass(frozen=True)
class ScenarioSpec:
    """A sequence of frames frames on an n-by-n grid.

    sigma is the Gaussian std in pixels, amplitude the total mass per frame.
    noise adds seeded zero-mean Gaussian perturbations (as a fraction of the
    frame's peak) before clipping at zero and renormalizing; the default is
    noiseless. wind, when given, is stamped into every frame's metadata as
    constant (east, north) components.
    """

    n: int
    frames: int
    kind: Rotate | Drift
    sigma: float = 1.0
    amplitude: float = 1.0
    seed: int = 0
    noise: float = 0.0
    wind: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if self.n < 1 or self.frames < 1:
            raise ValueError("n and frames must be >= 1")
        if not self.sigma > 0 or not self.amplitude > 0:
            raise ValueError("sigma and amplitude must be positive")
        if self.noise < 0:
            raise ValueError("noise must be nonnegative")
        if isinstance(self.kind, Rotate) and not self.kind.radius < self.n / 2:
            raise ValueError(
                f"radius {self.kind.radius} must be below n/2 = {self.n / 2}"
            )
        hi = self.n + _LO
        for k in range(self.frames):
            r, c = _mean(self, k)
            if not (_LO <= r <= hi and _LO <= c <= hi):
                raise ValueError(
                    f"frame {k} mean ({r:.3f}, {c:.3f}) exits the grid"
                )


def _mean(spec: ScenarioSpec, k: int) -> tuple[float, float]:
    """Frame k's Gaussian mean in (row, col) coordinates."""
    c0 = (spec.n + 1) / 2.0
    if isinstance(spec.kind, Rotate):
        th = 2.0 * np.pi * k / spec.frames
        return (c0 + spec.kind.radius * np.cos(th), c0 + spec.kind.radius * np.sin(th))
    de, dn = spec.kind.direction
    # east = +col, north = -row
    return (c0 - k * spec.kind.step * dn, c0 + k * spec.kind.step * de)


def generate(spec: ScenarioSpec) -> list[GridImage]:
    """Rasterize the scenario at pixel centers; each frame carries exactly
    spec.amplitude total mass and a full observation mask."""
    rows, cols = pixel_rows_cols(spec.n)
    rng = np.random.default_rng(spec.seed)
    meta = ImageMeta(wind=spec.wind) if spec.wind is not None else ImageMeta()
    out: list[GridImage] = []
    for k in range(spec.frames):
        mr, mc = _mean(spec, k)
        vals = np.exp(-((rows - mr) ** 2 + (cols - mc) ** 2) / (2.0 * spec.sigma**2))
        if spec.noise > 0:
            vals = vals + spec.noise * vals.max() * rng.standard_normal(vals.size)
            np.clip(vals, 0.0, None, out=vals)
        s = vals.sum()
        if s <= 0:
            raise ValueError(f"frame {k} rasterized to zero mass")
        out.append(GridImage.full(spec.n, vals * (spec.amplitude / s), meta=meta))
    return out


def arithmetic_mean(images: list[GridImage]) -> GridImage:
    """Per-pixel mean over the images that observed each pixel.

    Dividing by the observation count rather than by len(images) keeps
    sparsely observed pixels unbiased; pixels observed nowhere come back
    masked out.
    """
    if not images:
        raise ValueError("need at least one image")
    n = images[0].n
    if any(img.n != n for img in images):
        raise ValueError("all images must share the same side length")
    total = np.zeros(n * n)
    count = np.zeros(n * n)
    for img in images:
        total += img.values  # masked pixels hold 0
        count += img.mask
    seen = count > 0
    vals = np.zeros(n * n)
    vals[seen] = total[seen] / count[seen]
    return GridImage(n=n, values=vals, mask=seen)
