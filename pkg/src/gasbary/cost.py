"""Ground-cost matrices for gridded transport and their Gibbs kernels.

Three metrics over pixel positions x, y (1-based (row, col) coordinates,
distances in pixel units):

- euclidean:   c(x, y) = ||x - y||^2
- wfr:         c(x, y) = -log(cos^2(min(||x - y|| / (2 delta), pi/2))),
               capped at WFR_CAP once ||x - y|| >= pi * delta
- wind-biased: c(x, y) = (||x - y||^2 - t * <w, x - y>)_+ where x - y is the
               displacement from source to destination, so moving with the
               wind is cheaper than moving against it

Cost matrices are dense n^2 x n^2 with row i the destination pixel and column
j the source pixel. A memory budget guards the dense allocation; above it,
`streaming_kernel` still supports matvecs by generating row blocks on the fly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import pixel_rows_cols

WFR_CAP = 1.0e6
DEFAULT_MEMORY_BUDGET_BYTES = 8 << 30  # 8 GiB


class CapacityError(RuntimeError):
    """Raised when a dense cost/kernel matrix would exceed the memory budget."""


@dataclass(frozen=True)
class CostSpec:
    """Declarative ground-metric choice.

    kind is one of "euclidean", "wfr", "wind". delta (wfr) controls the
    distance scale beyond which mass is created/deleted rather than moved;
    wind (wind-biased) is the (east, north) wind vector already converted to
    pixel units; t scales the wind discount.
    """

    kind: str
    delta: float | None = None
    wind: tuple[float, float] | None = None
    t: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("euclidean", "wfr", "wind"):
            raise ValueError(f"unknown cost kind {self.kind!r}")
        if self.kind == "wfr":
            if self.delta is None or not (self.delta > 0):
                raise ValueError("wfr cost requires delta > 0")
        if self.kind == "wind":
            if self.wind is None or len(self.wind) != 2:
                raise ValueError("wind-biased cost requires a 2-vector wind")
            if not all(math.isfinite(c) for c in self.wind):
                raise ValueError("wind components must be finite")
            if self.t is None or not (self.t > 0):
                raise ValueError("wind-biased cost requires t > 0")
            object.__setattr__(self, "wind", (float(self.wind[0]), float(self.wind[1])))

    @classmethod
    def euclidean(cls) -> "CostSpec":
        return cls(kind="euclidean")

    @classmethod
    def wfr(cls, delta: float) -> "CostSpec":
        return cls(kind="wfr", delta=float(delta))

    @classmethod
    def wind_biased(cls, wind: tuple[float, float], t: float = 1.0) -> "CostSpec":
        return cls(kind="wind", wind=(float(wind[0]), float(wind[1])), t=float(t))


@dataclass(frozen=True)
class CostMatrix:
    """Dense realized ground cost; entries[i, j] = c(X_i, X_j), X_i destination."""

    n: int
    entries: np.ndarray
    spec: CostSpec

    def __post_init__(self) -> None:
        self.entries.flags.writeable = False

    @property
    def n2(self) -> int:
        return self.n * self.n


@dataclass(frozen=True)
class KernelMatrix:
    """Gibbs kernel K = exp(-C / lambda).

    entries is the dense matrix, or None for a streaming kernel that
    regenerates row blocks on demand inside apply_kernel. separable is set
    only for the euclidean kind, whose kernel factors into the outer product
    of a single n x n Gaussian factor applied along rows then columns.
    """

    n: int
    lam: float
    separable: bool
    entries: np.ndarray | None
    cost: CostMatrix | None = None
    spec: CostSpec | None = None
    row_block: int = 4096
    factor: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.entries is not None:
            self.entries.flags.writeable = False
        if self.factor is not None:
            self.factor.flags.writeable = False

    @property
    def n2(self) -> int:
        return self.n * self.n


def _cost_rows(spec: CostSpec, n: int, i0: int, i1: int) -> np.ndarray:
    """Cost rows i0:i1 (destination pixels) against every source pixel."""
    rows, cols = pixel_rows_cols(n)
    dr = rows[i0:i1, None] - rows[None, :]
    dc = cols[i0:i1, None] - cols[None, :]
    if spec.kind == "euclidean":
        out = dr * dr
        out += dc * dc
        return out
    if spec.kind == "wfr":
        d2 = dr * dr
        d2 += dc * dc
        dist = np.sqrt(d2)
        theta = np.minimum(dist / (2.0 * spec.delta), np.pi / 2.0)
        out = -2.0 * np.log(np.cos(theta))
        # cos(pi/2) only underflows to ~6e-17 in floats, so cap explicitly
        # from the distance test rather than trusting -log to diverge
        np.minimum(out, WFR_CAP, out=out)
        out[dist >= np.pi * spec.delta] = WFR_CAP
        return out
    we, wn = spec.wind  # type: ignore[misc]
    out = dr * dr
    out += dc * dc
    # displacement (east, north) of destination relative to source: east is
    # +col, north is -row (row 1 is the top/north edge)
    out -= spec.t * (we * dc - wn * dr)
    np.maximum(out, 0.0, out=out)
    return out


def check_budget(n: int, memory_budget_bytes: int = DEFAULT_MEMORY_BUDGET_BYTES) -> None:
    """Raise CapacityError if a dense n^2 x n^2 float64 matrix exceeds the budget."""
    need = 8 * (n * n) ** 2
    if need > memory_budget_bytes:
        n_max = int((memory_budget_bytes / 8) ** 0.25)
        raise CapacityError(
            f"dense {n * n} x {n * n} cost matrix needs {need} bytes, over the "
            f"{memory_budget_bytes}-byte budget; reduce the grid side to <= {n_max}, "
            f"raise the budget, or use streaming_kernel for matvecs"
        )


def build_cost(
    spec: CostSpec,
    n: int,
    memory_budget_bytes: int = DEFAULT_MEMORY_BUDGET_BYTES,
) -> CostMatrix:
    """Realize the dense n^2 x n^2 cost matrix for a metric spec."""
    if n < 1:
        raise ValueError("grid side must be >= 1")
    check_budget(n, memory_budget_bytes)
    return CostMatrix(n=n, entries=_cost_rows(spec, n, 0, n * n), spec=spec)


def kernel_from_cost(C: CostMatrix, lam: float) -> KernelMatrix:
    """Entrywise exp(-C/lambda); capped cost entries underflow to exactly 0."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    entries = np.exp(C.entries / -lam)
    factor = None
    separable = C.spec.kind == "euclidean"
    if separable:
        d = np.arange(C.n, dtype=np.float64)
        dd = d[:, None] - d[None, :]
        factor = np.exp(dd * dd / -lam)
    return KernelMatrix(
        n=C.n, lam=float(lam), separable=separable, entries=entries, cost=C,
        spec=C.spec, factor=factor,
    )


def streaming_kernel(
    spec: CostSpec, n: int, lam: float, row_block: int = 4096
) -> KernelMatrix:
    """Kernel without dense storage: apply_kernel regenerates row blocks on the fly.

    This is the path past the dense memory budget; each matvec costs one full
    regeneration of the cost entries, block by block.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if row_block < 1:
        raise ValueError("row_block must be >= 1")
    return KernelMatrix(
        n=n, lam=float(lam), separable=False, entries=None, cost=None,
        spec=spec, row_block=int(row_block),
    )


def apply_kernel(K: KernelMatrix, v: np.ndarray, transpose: bool = False) -> np.ndarray:
    """Exact matrix-vector product K v (or K^T v).

    Uses the factored n x n Gaussian convolution along rows then columns when
    the separable flag is set, the dense product otherwise, and streaming
    row-block regeneration when the kernel holds no dense entries.
    """
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size != K.n2:
        raise ValueError(f"vector length {v.size} does not match kernel side {K.n2}")
    if K.separable and K.factor is not None:
        # euclidean kernels factor over axes; the factor is symmetric so the
        # transpose product is the same computation
        V = v.reshape(K.n, K.n)
        return (K.factor @ V @ K.factor).reshape(-1)
    if K.entries is not None:
        return (K.entries.T if transpose else K.entries) @ v
    assert K.spec is not None
    out = np.zeros(K.n2, dtype=np.float64)
    for i0 in range(0, K.n2, K.row_block):
        i1 = min(i0 + K.row_block, K.n2)
        block = np.exp(_cost_rows(K.spec, K.n, i0, i1) / -K.lam)
        if transpose:
            out += block.T @ v[i0:i1]
        else:
            out[i0:i1] = block @ v
    return out
