"""Command-line front end.

Subcommands: synth | mean | barycenter | windrose | coverage | render.
Exit codes: 0 ok/converged, 2 validation error, 3 iteration limit hit
(outputs are still written), 4 memory budget exceeded.

Heavy imports happen inside the command handlers so that --threads can pin
the BLAS/OpenMP pool sizes via environment variables before numpy loads.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
import time
from pathlib import Path

_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)

_DIR_NAMES = {
    "east": (1.0, 0.0),
    "west": (-1.0, 0.0),
    "north": (0.0, 1.0),
    "south": (0.0, -1.0),
}


def _pair(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'a,b', got {text!r}")
    return (float(parts[0]), float(parts[1]))


def _direction(text: str) -> tuple[float, float]:
    if text.lower() in _DIR_NAMES:
        return _DIR_NAMES[text.lower()]
    de, dn = _pair(text)
    norm = (de * de + dn * dn) ** 0.5
    if norm == 0:
        raise argparse.ArgumentTypeError("direction must be nonzero")
    return (de / norm, dn / norm)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.split(",") if p.strip())


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gasbary",
        description="Transport-based temporal averaging of gridded gas "
        "concentration images.",
    )
    p.add_argument(
        "--threads",
        type=int,
        default=None,
        metavar="K",
        help="cap BLAS/OpenMP worker threads (set before numerical imports)",
    )
    sub = p.add_subparsers(dest="command", required=True)

    syn = sub.add_parser("synth", help="generate synthetic scenario frames")
    syn_kind = syn.add_subparsers(dest="kind", required=True)
    for kind in ("rotate", "drift"):
        sp = syn_kind.add_parser(kind)
        sp.add_argument("--n", type=int, default=32, help="grid side (default 32)")
        sp.add_argument("--frames", type=int, default=8)
        if kind == "rotate":
            sp.add_argument("--radius", type=float, default=5.0)
        else:
            sp.add_argument("--step", type=float, default=1.0)
            sp.add_argument(
                "--dir",
                dest="direction",
                type=_direction,
                default=(1.0, 0.0),
                help="drift direction: east|west|north|south or 'de,dn'",
            )
        sp.add_argument("--sigma", type=float, default=1.0)
        sp.add_argument("--amplitude", type=float, default=1.0)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--noise", type=float, default=0.0)
        sp.add_argument(
            "--wind",
            type=_pair,
            default=None,
            help="constant wind 'u,v' (east, north m/s) stamped into metadata",
        )
        sp.add_argument("--out", default="frame", help="output file prefix")
        sp.set_defaults(func=_cmd_synth, kind=kind)

    mean = sub.add_parser("mean", help="missing-aware arithmetic mean of grids")
    mean.add_argument("inputs", nargs="+", help="grid files")
    mean.add_argument("--out", default="mean", help="output prefix")
    mean.set_defaults(func=_cmd_mean)

    bc = sub.add_parser("barycenter", help="transport-based average of grids")
    bc.add_argument("inputs", nargs="+", help="grid files (at least 2)")
    bc.add_argument(
        "--cost",
        choices=("l2", "wfr", "l2w"),
        default="l2",
        help="squared Euclidean, truncated-cone, or wind-biased cost",
    )
    bc.add_argument(
        "--lam",
        type=float,
        default=None,
        help="entropic regularization "
        "(default: 0.01 x median nonzero cost; an unvalidated scale heuristic)",
    )
    bc.add_argument(
        "--lam-u",
        type=float,
        default=1.0,
        help="marginal relaxation; 'inf' = hard marginals (default 1.0)",
    )
    bc.add_argument(
        "--delta", type=float, default=None, help="wfr radius scale (default n/8)"
    )
    bc.add_argument("--t", type=float, default=1.0, help="wind bias strength")
    bc.add_argument(
        "--wind-scale",
        type=float,
        default=1.0,
        help="pixels of bias per m/s of wind (default 1.0)",
    )
    bc.add_argument("--weights", type=_floats, default=None, help="'w1,w2,...'")
    bc.add_argument("--iters", type=int, default=5000)
    bc.add_argument("--tol", type=float, default=1e-6)
    bc.add_argument("--stabilize-every", type=int, default=10)
    bc.add_argument(
        "--memory-budget",
        type=int,
        default=None,
        help="cost/kernel memory cap in bytes (default 8 GiB)",
    )
    bc.add_argument("--out", default="barycenter", help="output prefix")
    bc.set_defaults(func=_cmd_barycenter)

    wr = sub.add_parser("windrose", help="16-sector windrose from a wind CSV")
    wr.add_argument("input", help="CSV with header timestamp,u,v")
    wr.add_argument("--calm", type=float, default=0.2, help="calm threshold m/s")
    wr.add_argument(
        "--edges", type=_floats, default=(0.0, 2.0, 4.0, 6.0, 8.0),
        help="speed bin edges, last bin open-ended",
    )
    wr.add_argument("--out", default="windrose", help="output prefix")
    wr.set_defaults(func=_cmd_windrose)

    cov = sub.add_parser("coverage", help="per-pixel observation counts")
    cov.add_argument("inputs", nargs="+", help="grid files")
    cov.add_argument("--clip", type=int, default=None)
    cov.add_argument("--out", default="coverage", help="output prefix")
    cov.set_defaults(func=_cmd_coverage)

    ren = sub.add_parser("render", help="render a grid file or windrose CSV to PPM")
    ren.add_argument("input")
    ren.add_argument("--out", default=None, help="output path (default input+.ppm)")
    ren.add_argument("--scale", type=int, default=8, help="grid pixel block size")
    ren.add_argument("--size", type=int, default=320, help="windrose raster size")
    ren.set_defaults(func=_cmd_render)
    return p


def _cmd_synth(args: argparse.Namespace) -> int:
    from .ingest import write_grid
    from .synthetic import Drift, Rotate, ScenarioSpec, generate

    if args.kind == "rotate":
        kind = Rotate(radius=args.radius)
    else:
        kind = Drift(step=args.step, direction=args.direction)
    spec = ScenarioSpec(
        n=args.n,
        frames=args.frames,
        kind=kind,
        sigma=args.sigma,
        amplitude=args.amplitude,
        seed=args.seed,
        noise=args.noise,
        wind=args.wind,
    )
    for k, img in enumerate(generate(spec)):
        path = Path(f"{args.out}_{k:03d}.grid")
        write_grid(img, path)
        print(path)
    return 0


def _load_inputs(paths: list[str]):
    from .ingest import parse_grid

    return [parse_grid(p) for p in paths]


def _cmd_mean(args: argparse.Namespace) -> int:
    from .ingest import write_grid
    from .render import render_grid
    from .synthetic import arithmetic_mean

    out = arithmetic_mean(_load_inputs(args.inputs))
    write_grid(out, f"{args.out}.grid")
    render_grid(out, f"{args.out}.ppm")
    print(f"{args.out}.grid")
    return 0


def _cmd_barycenter(args: argparse.Namespace) -> int:
    import numpy as np

    from .cost import DEFAULT_MEMORY_BUDGET_BYTES, CostSpec, build_cost, kernel_from_cost
    from .grid import GridImage
    from .ingest import write_grid
    from .ot_solver import SolverConfig, barycenter
    from .render import render_grid

    t0 = time.monotonic()
    images = _load_inputs(args.inputs)
    if len(images) < 2:
        raise ValueError("barycenter needs at least 2 inputs")
    n = images[0].n
    budget = (
        args.memory_budget if args.memory_budget is not None else DEFAULT_MEMORY_BUDGET_BYTES
    )

    if args.cost == "l2":
        specs = [CostSpec.euclidean()] * len(images)
    elif args.cost == "wfr":
        delta = args.delta if args.delta is not None else n / 8.0
        specs = [CostSpec.wfr(delta)] * len(images)
    else:
        specs = []
        for k, img in enumerate(images):
            if img.meta.wind is None:
                raise ValueError(
                    f"--cost l2w needs wind metadata; {args.inputs[k]} has none"
                )
            u, v = img.meta.wind
            specs.append(
                CostSpec.wind_biased(
                    (u * args.wind_scale, v * args.wind_scale), t=args.t
                )
            )

    # identical specs share one cost/kernel object (and its memory)
    cost_cache: dict = {}
    costs = []
    for spec in specs:
        if spec not in cost_cache:
            cost_cache[spec] = build_cost(spec, n, memory_budget_bytes=budget)
        costs.append(cost_cache[spec])

    if args.lam is not None:
        lam = args.lam
    else:
        ent = costs[0].entries
        nz = ent[ent > 0]
        if nz.size == 0:
            raise ValueError("degenerate cost matrix (all zeros); pass --lam")
        lam = 0.01 * float(np.median(nz))

    kernels = [kernel_from_cost(C, lam) for C in costs]
    # distinct cost objects may share array identity; dedupe kernels likewise
    kern_cache = {id(C): K for C, K in zip(costs, kernels)}
    kernels = [kern_cache[id(C)] for C in costs]

    cfg = SolverConfig(
        lam=lam,
        lam_u=args.lam_u,
        max_iters=args.iters,
        tol=args.tol,
        stabilize_every=args.stabilize_every,
    )
    weights = list(args.weights) if args.weights is not None else None
    res = barycenter(images, kernels, weights=weights, cfg=cfg)

    out_img = GridImage.full(n, res.g_bar)
    write_grid(out_img, f"{args.out}.grid")
    render_grid(out_img, f"{args.out}.ppm")
    diag = {
        "config": {
            "cost": args.cost,
            "lam": lam,
            "lam_u": args.lam_u,
            "t": args.t,
            "wind_scale": args.wind_scale,
            "delta": args.delta,
            "iters": args.iters,
            "tol": args.tol,
            "stabilize_every": args.stabilize_every,
            "inputs": list(args.inputs),
        },
        "converged": res.converged,
        "iterations": res.iterations,
        "wall_clock_s": time.monotonic() - t0,
        "max_rss_bytes": _max_rss_bytes(),
        "objective_samples": [[it, val] for it, val in res.objective_samples],
        "per_image": [
            {
                "value": r.value,
                "marginal_gap": list(r.marginal_gap),
                "converged": r.converged,
            }
            for r in res.per_image
        ],
    }
    Path(f"{args.out}.diag.json").write_text(json.dumps(diag, sort_keys=True, indent=2) + "\n")
    print(f"{args.out}.grid")
    if not res.converged:
        print(
            f"warning: iteration limit {args.iters} reached before tol={args.tol}",
            file=sys.stderr,
        )
        return 3
    return 0


def _max_rss_bytes() -> int | None:
    try:
        import resource

        rss = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
        return rss * 1024 if sys.platform.startswith("linux") else rss
    except Exception:
        return None


def _windrose_csv_lines(hist) -> list[str]:
    from .ingest import SECTOR_NAMES

    edges = list(hist.speed_edges)
    labels = [
        f"count_{edges[i]:g}_{edges[i + 1]:g}" for i in range(len(edges) - 1)
    ] + [f"count_{edges[-1]:g}_inf"]
    lines = [
        f"# windrose v1 calm_fraction={float(hist.calm_fraction)!r} "
        f"n_records={hist.n_records} edges={','.join(f'{e:g}' for e in edges)}",
        "sector,name,frequency," + ",".join(labels),
    ]
    for s in range(16):
        counts = ",".join(str(int(c)) for c in hist.counts[s])
        lines.append(f"{s},{SECTOR_NAMES[s]},{float(hist.frequencies[s])!r},{counts}")
    return lines


def read_windrose_csv(path: str | Path):
    """Rebuild a WindroseHistogram from a CSV written by the windrose command."""
    import numpy as np

    from .ingest import WindroseHistogram

    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# windrose v1 "):
        raise ValueError(f"{path}: not a windrose CSV")
    m = re.match(
        r"# windrose v1 calm_fraction=(\S+) n_records=(\d+) edges=(\S+)", lines[0]
    )
    if m is None:
        raise ValueError(f"{path}: malformed windrose header")
    calm = float(m.group(1))
    n_rec = int(m.group(2))
    edges = tuple(float(e) for e in m.group(3).split(","))
    rows = [ln.split(",") for ln in lines[2:] if ln.strip()]
    if len(rows) != 16:
        raise ValueError(f"{path}: expected 16 sector rows, got {len(rows)}")
    counts = np.array([[int(c) for c in row[3:]] for row in rows], dtype=np.int64)
    freqs = np.array([float(row[2]) for row in rows])
    return WindroseHistogram(
        frequencies=freqs,
        counts=counts,
        calm_fraction=calm,
        speed_edges=edges,
        n_records=n_rec,
    )


def _cmd_windrose(args: argparse.Namespace) -> int:
    from .ingest import read_wind_csv, windrose
    from .render import render_windrose

    hist = windrose(
        read_wind_csv(args.input), speed_edges=args.edges, calm_threshold=args.calm
    )
    Path(f"{args.out}.csv").write_text("\n".join(_windrose_csv_lines(hist)) + "\n")
    render_windrose(hist, f"{args.out}.ppm")
    print(f"{args.out}.csv")
    return 0


def _cmd_coverage(args: argparse.Namespace) -> int:
    import numpy as np

    from .grid import GridImage
    from .ingest import coverage_map
    from .render import render_grid

    images = _load_inputs(args.inputs)
    n = images[0].n
    count = coverage_map(images, clip=args.clip)
    grid2d = count.reshape(n, n)
    lines = [f"# coverage v1 n={n}"]
    lines += [",".join(str(int(c)) for c in row) for row in grid2d]
    Path(f"{args.out}.csv").write_text("\n".join(lines) + "\n")
    render_grid(GridImage.full(n, count.astype(np.float64)), f"{args.out}.ppm")
    print(f"{args.out}.csv")
    return 0


def _cmd_render(args: argparse.Namespace) -> int:
    from .ingest import MAGIC, parse_grid
    from .render import render_grid, render_windrose

    out = args.out if args.out is not None else f"{args.input}.ppm"
    head = Path(args.input).read_text(errors="replace").lstrip()[: len(MAGIC)]
    if head == MAGIC:
        render_grid(parse_grid(args.input), out, scale=args.scale)
    else:
        render_windrose(read_windrose_csv(args.input), out, size=args.size)
    print(out)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be >= 1", file=sys.stderr)
            return 2
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)
    try:
        return args.func(args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except RuntimeError as e:
        from .cost import CapacityError

        if isinstance(e, CapacityError):
            print(f"error: {e}", file=sys.stderr)
            return 4
        raise


if __name__ == "__main__":
    sys.exit(main())
