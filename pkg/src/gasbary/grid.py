"""Grid geometry, flattening conventions, masks, and basic raster statistics.

Rasters are n x n, flattened row by row into length-n^2 vectors. Flat indices
and pixel coordinates are 1-based: flat index j corresponds to pixel
(ceil(j/n), ((j-1) mod n) + 1). Missing pixels carry an explicit mask bit and
a stored value of 0, so downstream mass-based arithmetic never meets NaN.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


class PixelPosition(NamedTuple):
    row: int
    col: int


@dataclass(frozen=True)
class ImageMeta:
    """Optional raster metadata.

    date is an ISO-8601 string; wind is the (east, north) mean wind in m/s
    associated with the image; bbox is an ingest pass-through
    [lon_min, lat_min, lon_max, lat_max] kept so file round-trips are exact.
    """

    date: str | None = None
    wind: tuple[float, float] | None = None
    bbox: tuple[float, float, float, float] | None = None


_EMPTY_META = ImageMeta()


@dataclass(frozen=True)
class GridImage:
    """An n x n nonnegative raster with a validity mask.

    values is the row-major length-n^2 concentration vector (arbitrary linear
    units); mask[i] is True where pixel i was observed. Masked pixels are
    forced to value 0 on construction. Instances are immutable: the arrays are
    copied in and marked read-only, so sharing across threads is safe.
    """

    n: int
    values: np.ndarray
    mask: np.ndarray
    meta: ImageMeta = field(default=_EMPTY_META)

    def __post_init__(self) -> None:
        n = self.n
        if not (isinstance(n, (int, np.integer)) and n >= 1):
            raise ValueError(f"side length must be a positive integer, got {n!r}")
        values = np.asarray(self.values, dtype=np.float64).ravel()
        mask = np.asarray(self.mask, dtype=bool).ravel()
        if values.shape != (n * n,) or mask.shape != (n * n,):
            raise ValueError(
                f"values and mask must have length n^2={n * n}, "
                f"got {values.size} and {mask.size}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite; encode missing pixels via mask")
        if np.any(values < 0):
            bad = int(np.argmax(values < 0))
            pos = pixel_position(bad + 1, n)
            raise ValueError(f"negative value at pixel (row {pos.row}, col {pos.col})")
        values = np.where(mask, values, 0.0)
        values.flags.writeable = False
        mask = mask.copy()
        mask.flags.writeable = False
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def full(cls, n: int, values: np.ndarray, meta: ImageMeta = _EMPTY_META) -> "GridImage":
        """Build an image with every pixel observed."""
        vals = np.asarray(values, dtype=np.float64).ravel()
        return cls(n=n, values=vals, mask=np.ones(vals.size, dtype=bool), meta=meta)


def pixel_position(j: int, n: int) -> PixelPosition:
    """Map a 1-based row-major flat index to its (row, col), both in [1, n]."""
    if not 1 <= j <= n * n:
        raise IndexError(f"flat index {j} out of range [1, {n * n}]")
    return PixelPosition(row=(j + n - 1) // n, col=(j - 1) % n + 1)


def pixel_rows_cols(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column coordinates (1-based) of every flat index, as two length-n^2 arrays."""
    idx = np.arange(n * n)
    return idx // n + 1.0, idx % n + 1.0


def flatten(image: np.ndarray) -> np.ndarray:
    """Flatten a square matrix row by row into a length-n^2 vector."""
    arr = np.asarray(image)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {arr.shape}")
    return arr.reshape(-1).copy()


def unflatten(vector: np.ndarray, n: int) -> np.ndarray:
    """Inverse of flatten: reshape a length-n^2 vector to an n x n matrix."""
    vec = np.asarray(vector).ravel()
    if vec.size != n * n:
        raise ValueError(f"expected length {n * n}, got {vec.size}")
    return vec.reshape(n, n).copy()


def total_mass(g: GridImage) -> float:
    """Sum of values over observed pixels (masked pixels contribute 0)."""
    return float(g.values.sum())


def centroid(g: GridImage) -> tuple[float, float]:
    """Mass-weighted mean pixel position (row, col) of an image."""
    return centroid_of(g.values, g.n)


def centroid_of(values: np.ndarray, n: int) -> tuple[float, float]:
    """Mass-weighted mean (row, col) of a length-n^2 nonnegative vector."""
    v = np.asarray(values, dtype=np.float64).ravel()
    m = v.sum()
    if not m > 0:
        raise ValueError("centroid undefined for zero total mass")
    rows, cols = pixel_rows_cols(n)
    return float(rows @ v / m), float(cols @ v / m)
