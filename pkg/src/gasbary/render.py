"""Dependency-free raster rendering to binary PPM (P6).

Grids become min-max normalized grayscale with masked pixels in magenta;
windroses become stacked 16-sector wedge plots, one color per speed bin.
Identical inputs produce byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .grid import GridImage
from .ingest import WindroseHistogram

MASK_COLOR = (255, 0, 255)
# speed-bin colors, slow (blue) to fast (red)
PALETTE = (
    (43, 131, 186),
    (171, 221, 164),
    (255, 255, 191),
    (253, 174, 97),
    (215, 25, 28),
)
RING_COLOR = (200, 200, 200)


def write_ppm(rgb: np.ndarray, path: str | Path) -> None:
    """Write an (h, w, 3) uint8 array as binary PPM."""
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise ValueError("expected an (h, w, 3) uint8 array")
    h, w = rgb.shape[:2]
    with Path(path).open("wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())


def grid_rgb(g: GridImage, scale: int = 8) -> np.ndarray:
    """Grayscale raster of a grid, each pixel as a scale x scale block.

    Normalization is min-max over observed pixels; a constant image renders
    mid-gray. Masked pixels get the magenta sentinel.
    """
    if scale < 1:
        raise ValueError("scale must be >= 1")
    vals = g.values.reshape(g.n, g.n)
    mask = g.mask.reshape(g.n, g.n)
    if mask.any():
        lo = float(vals[mask].min())
        hi = float(vals[mask].max())
    else:
        lo = hi = 0.0
    if hi > lo:
        norm = (vals - lo) / (hi - lo)
    else:
        norm = np.full_like(vals, 0.5)
    gray = np.clip(np.round(norm * 255.0), 0, 255).astype(np.uint8)
    rgb = np.repeat(gray[:, :, None], 3, axis=2)
    rgb[~mask] = MASK_COLOR
    return np.repeat(np.repeat(rgb, scale, axis=0), scale, axis=1)


def render_grid(g: GridImage, path: str | Path, scale: int = 8) -> None:
    write_ppm(grid_rgb(g, scale=scale), path)


def _bin_colors(n_bins: int) -> list[tuple[int, int, int]]:
    if n_bins == 1:
        return [PALETTE[len(PALETTE) // 2]]
    return [
        PALETTE[round(b * (len(PALETTE) - 1) / (n_bins - 1))] for b in range(n_bins)
    ]


def windrose_rgb(hist: WindroseHistogram, size: int = 320) -> np.ndarray:
    """Stacked wedge plot: wedge length is sector frequency (longest sector
    spans the reference ring), segment colors follow the speed bins."""
    if size < 32:
        raise ValueError("size must be >= 32")
    rgb = np.full((size, size, 3), 255, dtype=np.uint8)
    c = (size - 1) / 2.0
    r_max = 0.42 * size
    yy, xx = np.mgrid[0:size, 0:size]
    dx = xx - c
    dy_up = c - yy
    rad = np.hypot(dx, dy_up)
    phi = np.degrees(np.arctan2(dx, dy_up)) % 360.0  # clockwise from North
    sector = (np.floor(((phi + 11.25) % 360.0) / 22.5).astype(np.int64)) % 16

    ring = np.abs(rad - r_max) <= 0.75
    rgb[ring] = RING_COLOR

    total = int(hist.counts.sum())
    if total > 0:
        n_bins = hist.counts.shape[1]
        fmax = float(hist.frequencies.max())
        # stacked outer radius of each (sector, bin) segment
        edge = r_max * np.cumsum(hist.counts, axis=1) / (fmax * total)
        colors = _bin_colors(n_bins)
        painted = np.zeros((size, size), dtype=bool)
        for b in range(n_bins):
            inside = (rad <= edge[sector, b]) & ~painted
            rgb[inside] = colors[b]
            painted |= inside
    return rgb


def render_windrose(hist: WindroseHistogram, path: str | Path, size: int = 320) -> None:
    write_ppm(windrose_rgb(hist, size=size), path)
