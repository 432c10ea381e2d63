"""Text-format I/O for concentration grids, hourly wind records, and the
derived statistics: coverage counts, windowed mean wind, windrose histograms.

Grid files are a deliberately tiny text format so round-trips are bit-exact
and diffable:

    XCH4-GRID v1 <n>
    <n comma-separated values>   (n rows, row-major, literal NaN = missing)

with an optional JSON sidecar `<stem>.meta.json` carrying date, bbox, and
wind. Values are written with repr(), the shortest exact decimal, so
parse(write(g)) reproduces every float bit-for-bit and write(parse(p)) is
byte-identical on files this writer produced.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from .grid import GridImage, ImageMeta

MAGIC = "XCH4-GRID"
VERSION = "v1"
CALM_THRESHOLD = 0.2  # m/s; slower records are direction-less
SPEED_EDGES = (0.0, 2.0, 4.0, 6.0, 8.0)  # upper bin open-ended
SECTOR_NAMES = (
    "N", "NNE", "NE", "ENE", "E", "ESE", "SE", "SSE",
    "S", "SSW", "SW", "WSW", "W", "WNW", "NW", "NNW",
)


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".meta.json")


def parse_grid(path: str | Path) -> GridImage:
    """Read a grid file (plus sidecar metadata if present) into a GridImage.

    Malformed content raises ValueError naming the offending line, and
    negative or infinite values name their (row, col).
    """
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != MAGIC or head[1] != VERSION:
        raise ValueError(f"{path}: line 1: expected '{MAGIC} {VERSION} <n>'")
    try:
        n = int(head[2])
    except ValueError:
        n = 0
    if n < 1:
        raise ValueError(f"{path}: line 1: bad side length {head[2]!r}")
    if len(lines) < n + 1:
        raise ValueError(f"{path}: expected {n} data rows, found {len(lines) - 1}")
    extra = [ln for ln in lines[n + 1 :] if ln.strip()]
    if extra:
        raise ValueError(f"{path}: trailing content after row {n}")

    values = np.zeros(n * n)
    mask = np.ones(n * n, dtype=bool)
    for r in range(n):
        cells = lines[r + 1].split(",")
        if len(cells) != n:
            raise ValueError(
                f"{path}: line {r + 2}: expected {n} values, got {len(cells)}"
            )
        for c, cell in enumerate(cells):
            try:
                x = float(cell)
            except ValueError:
                raise ValueError(
                    f"{path}: line {r + 2}: bad value {cell.strip()!r}"
                ) from None
            j = r * n + c
            if math.isnan(x):
                mask[j] = False
            elif math.isinf(x) or x < 0:
                raise ValueError(
                    f"{path}: row {r + 1}, col {c + 1}: "
                    f"values must be nonnegative and finite, got {cell.strip()}"
                )
            else:
                values[j] = x

    meta = ImageMeta()
    side = _sidecar(path)
    if side.exists():
        raw = json.loads(side.read_text())
        wind = raw.get("wind_uv")
        bbox = raw.get("bbox")
        meta = ImageMeta(
            date=raw.get("date"),
            wind=tuple(float(x) for x in wind) if wind is not None else None,
            bbox=tuple(float(x) for x in bbox) if bbox is not None else None,
        )
    return GridImage(n=n, values=values, mask=mask, meta=meta)


def write_grid(g: GridImage, path: str | Path) -> None:
    """Serialize a GridImage and its sidecar; exact inverse of parse_grid."""
    path = Path(path)
    rows = [f"{MAGIC} {VERSION} {g.n}"]
    for r in range(g.n):
        cells = []
        for c in range(g.n):
            j = r * g.n + c
            cells.append(repr(float(g.values[j])) if g.mask[j] else "NaN")
        rows.append(",".join(cells))
    path.write_text("\n".join(rows) + "\n")

    meta = {
        "date": g.meta.date,
        "bbox": list(g.meta.bbox) if g.meta.bbox is not None else None,
        "wind_uv": list(g.meta.wind) if g.meta.wind is not None else None,
    }
    _sidecar(path).write_text(json.dumps(meta, sort_keys=True) + "\n")


def crop_to_square(arr: np.ndarray) -> np.ndarray:
    """Largest centered square of a 2-D array (extra rows/cols split evenly,
    the leading side keeping the smaller half)."""
    if arr.ndim != 2:
        raise ValueError("expected a 2-D array")
    h, w = arr.shape
    n = min(h, w)
    r0 = (h - n) // 2
    c0 = (w - n) // 2
    return arr[r0 : r0 + n, c0 : c0 + n]


@dataclass(frozen=True)
class WindRecord:
    """One wind sample: timestamp plus (east, north) components in m/s."""

    timestamp: datetime
    u: float
    v: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.u) and math.isfinite(self.v)):
            raise ValueError("wind components must be finite")

    @property
    def speed(self) -> float:
        return math.hypot(self.u, self.v)


def read_wind_csv(path: str | Path) -> list[WindRecord]:
    """Read records from a CSV with header `timestamp,u,v` (ISO-8601 times)."""
    path = Path(path)
    out: list[WindRecord] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["timestamp", "u", "v"]:
            raise ValueError(f"{path}: expected header 'timestamp,u,v'")
        for i, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise ValueError(f"{path}: line {i}: expected 3 fields, got {len(row)}")
            try:
                ts = datetime.fromisoformat(row[0].strip())
                out.append(WindRecord(ts, float(row[1]), float(row[2])))
            except ValueError as e:
                raise ValueError(f"{path}: line {i}: {e}") from None
    return out


def _as_dt(t: str | datetime) -> datetime:
    return t if isinstance(t, datetime) else datetime.fromisoformat(t)


def mean_wind(
    records: list[WindRecord],
    window: tuple[str | datetime, str | datetime] | None = None,
) -> tuple[float, float]:
    """Arithmetic mean of (u, v) over records with start <= t < end.

    window=None averages everything. An empty selection is an error: a frame
    without wind cannot use a wind-biased cost.
    """
    if window is not None:
        start, end = _as_dt(window[0]), _as_dt(window[1])
        records = [r for r in records if start <= r.timestamp < end]
    if not records:
        raise ValueError("no wind records in window")
    return (
        sum(r.u for r in records) / len(records),
        sum(r.v for r in records) / len(records),
    )


@dataclass(frozen=True)
class WindroseHistogram:
    """16-sector meteorological windrose (direction the wind blows FROM).

    frequencies sum to 1 over non-calm records; counts is (16, n_speed_bins)
    with speed bins [e0,e1), ..., [e_last, inf).
    """

    frequencies: np.ndarray
    counts: np.ndarray
    calm_fraction: float
    speed_edges: tuple[float, ...]
    n_records: int


def wind_sector(u: float, v: float) -> int:
    """Sector index 0..15 (0 = North) of the direction (u, v) blows from."""
    theta = (270.0 - math.degrees(math.atan2(v, u))) % 360.0
    return int(math.floor(((theta + 11.25) % 360.0) / 22.5)) % 16


def windrose(
    records: list[WindRecord],
    speed_edges: tuple[float, ...] = SPEED_EDGES,
    calm_threshold: float = CALM_THRESHOLD,
) -> WindroseHistogram:
    """Bin records into 16 direction sectors and per-sector speed classes."""
    if len(speed_edges) < 1 or any(
        speed_edges[i] >= speed_edges[i + 1] for i in range(len(speed_edges) - 1)
    ):
        raise ValueError("speed_edges must be strictly increasing")
    counts = np.zeros((16, len(speed_edges)), dtype=np.int64)
    calm = 0
    for r in records:
        s = r.speed
        if s < calm_threshold:
            calm += 1
            continue
        b = int(np.searchsorted(speed_edges, s, side="right")) - 1
        b = max(b, 0)  # speeds below edges[0] but above calm land in bin 0
        counts[wind_sector(r.u, r.v), b] += 1
    total = int(counts.sum())
    freq = counts.sum(axis=1) / total if total else np.zeros(16)
    return WindroseHistogram(
        frequencies=freq,
        counts=counts,
        calm_fraction=calm / len(records) if records else 0.0,
        speed_edges=tuple(speed_edges),
        n_records=len(records),
    )


def coverage_map(images: list[GridImage], clip: int | None = None) -> np.ndarray:
    """Per-pixel count of images observing each pixel, optionally clipped."""
    if not images:
        raise ValueError("need at least one image")
    n = images[0].n
    if any(img.n != n for img in images):
        raise ValueError("all images must share the same side length")
    count = np.zeros(n * n, dtype=np.int64)
    for img in images:
        count += img.mask
    if clip is not None:
        if clip < 0:
            raise ValueError("clip must be nonnegative")
        np.minimum(count, clip, out=count)
    return count
