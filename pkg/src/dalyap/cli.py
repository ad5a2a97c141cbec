"""Command line: ``dalyap check | lyapunov | estimate | verify``.

Exit status: 0 success, 1 mathematical failure (hypotheses, properties,
empty estimate), 2 input/output or format errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import io
from .estimator import (
    EmptySublevel,
    attach_sublevel,
    compare,
    extract_sublevel,
    rasterize,
    translate_region,
)
from .lyapunov import (
    LyapunovSeries,
    OrbitConfig,
    OrbitDiverged,
    OrbitUndecided,
    orbit_sum,
    series_solve,
)
from .mapmodel import NotAFixedPoint, PolyMap, shift_fixed_point
from .spectral import (
    GrowthUncertified,
    HypothesisError,
    SpectralConfig,
    assemble_spectral_info,
)

log = logging.getLogger("dalyap")

EXIT_OK, EXIT_MATH, EXIT_IO = 0, 1, 2


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str
    map: str
    x0: list[float] | None = None
    degree: int = 8
    window: list[tuple[float, float]] | None = None
    resolution: list[int] = field(default_factory=lambda: [200])
    method: str = "series"
    budget: int = 10_000
    escape_radius: float = 1e8
    n_tail: int = 10
    out_prefix: str | None = None
    threads: int = 1
    seed: int = 42
    svg: bool = False
    lyapunov: str | None = None
    orbit_at: list[list[float]] | None = None
    rho_margin: float = 0.0
    gamma: float = 0.5
    band: int = 1

    def __post_init__(self):
        for name in ("degree", "budget", "threads"):
            if getattr(self, name) < 1:
                raise InputError(f"--{name} must be positive")
        if not self.escape_radius > 0:
            raise InputError("--escape-radius must be positive")
        if self.n_tail < 0:
            raise InputError("--n-tail must be non-negative")
        if any(r < 2 for r in self.resolution):
            raise InputError("--res must be at least 2")
        if self.window:
            for lo, hi in self.window:
                if not lo < hi:
                    raise InputError(f"window axis {lo}:{hi} is not well ordered")

    @property
    def orbit(self) -> OrbitConfig:
        return OrbitConfig(self.budget, self.escape_radius, self.n_tail)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _window(text: str) -> list[tuple[float, float]]:
    out = []
    try:
        for part in text.split(","):
            lo, hi = part.split(":")
            out.append((float(lo), float(hi)))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a window like -1:1,-2:2, got {text!r}") from exc
    return out


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _points(text: str) -> list[list[float]]:
    return [_floats(p) for p in text.split(";") if p.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--map", required=True, help="map JSON file, or a bundled name: " + ", ".join(io.BUNDLED_MAPS))
    common.add_argument("--x0", type=_floats, help="fixed point of the map, e.g. 0.25,0 (default: origin)")
    common.add_argument("--degree", type=int, default=8, help="series truncation degree (default 8)")
    common.add_argument("--window", type=_window, help="raster window, e.g. -5:5,-1.5:1.5 (default -1:1 per axis)")
    common.add_argument("--res", type=_ints, default=[200], help="cells per axis, one value or one per axis")
    common.add_argument("--method", choices=("series", "orbit"), default="series", help="V column of the grid")
    common.add_argument("--budget", type=int, default=10_000, help="orbit iteration budget")
    common.add_argument("--escape-radius", type=float, default=1e8)
    common.add_argument("--n-tail", type=int, default=10, help="steps summed after capture")
    common.add_argument("--out-prefix", help="prefix for output files (default: map file stem)")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--svg", action="store_true", help="also render <prefix>.region.svg (2-D maps)")
    common.add_argument("--rho-margin", type=float, default=0.0,
                        help="fraction of 1-r added to the certification rate")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="dalyap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("check", parents=[common], help="check stability hypotheses, print constants as JSON")
    p = sub.add_parser("lyapunov", parents=[common], help="solve for the Lyapunov series, write <prefix>.V.json")
    p.add_argument("--orbit-at", type=_points,
                   help="also write orbit sums at these points to <prefix>.orbit.csv, e.g. '0,0.5;1,0.2'")
    sub.add_parser("estimate", parents=[common], help="rasterize, extract the sublevel estimate, compare")
    p = sub.add_parser("verify", parents=[common], help="run the property suites, write <prefix>.verify.json")
    p.add_argument("--lyapunov", help="series JSON to verify instead of solving afresh")
    return parser


def config_from_args(args) -> RunConfig:
    return RunConfig(
        subcommand=args.subcommand,
        map=args.map,
        x0=args.x0,
        degree=args.degree,
        window=args.window,
        resolution=args.res,
        method=args.method,
        budget=args.budget,
        escape_radius=args.escape_radius,
        n_tail=args.n_tail,
        out_prefix=args.out_prefix,
        threads=args.threads,
        seed=args.seed,
        svg=args.svg,
        lyapunov=getattr(args, "lyapunov", None),
        orbit_at=getattr(args, "orbit_at", None),
        rho_margin=args.rho_margin,
    )


def _prefix(cfg: RunConfig) -> str:
    return cfg.out_prefix or Path(cfg.map).stem


def load_problem(cfg: RunConfig) -> tuple[PolyMap, PolyMap, list[float]]:
    try:
        g = io.resolve_map(cfg.map)
    except (OSError, json.JSONDecodeError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"cannot load map {cfg.map!r}: {exc}") from exc
    x0 = cfg.x0 or [0.0] * g.dim
    if len(x0) != g.dim:
        raise InputError(f"--x0 has {len(x0)} coordinates, map dimension is {g.dim}")
    f = shift_fixed_point(g, x0)
    return g, f, x0


def _spectral(f: PolyMap, cfg: RunConfig):
    return assemble_spectral_info(f, SpectralConfig(rho_margin=cfg.rho_margin))


def cmd_check(cfg: RunConfig) -> int:
    g, f, x0 = load_problem(cfg)
    info = _spectral(f, cfg)
    doc = info.to_json()
    doc["x0"] = x0
    sys.stdout.write(io.dumps(doc))
    return EXIT_OK


def cmd_lyapunov(cfg: RunConfig) -> int:
    g, f, x0 = load_problem(cfg)
    info = _spectral(f, cfg)
    V = series_solve(f, degree=cfg.degree)
    doc = V.to_json(names=g.names)
    doc["x0"] = x0
    prefix = _prefix(cfg)
    path = io.write_json(f"{prefix}.V.json", doc)
    log.info("wrote %s", path)
    if cfg.orbit_at:
        rows = []
        for x in cfg.orbit_at:
            if len(x) != g.dim:
                raise InputError(f"orbit point {x} has wrong dimension")
            y = [a - b for a, b in zip(x, x0)]
            try:
                rows.append((x, orbit_sum(f, y, info, cfg.orbit)))
            except (OrbitDiverged, OrbitUndecided) as exc:
                log.warning("orbit sum at %s: %s", x, exc)
        io.write_orbit_csv(rows, g.dim, f"{prefix}.orbit.csv")
    for m, msg in sorted(V.warnings.items()):
        print(f"warning: {msg}", file=sys.stderr)
    return EXIT_OK


def run_estimate(cfg: RunConfig):
    """The estimate pipeline; returns (grid in original coordinates, summary dict)."""
    g, f, x0 = load_problem(cfg)
    info = _spectral(f, cfg)
    V = series_solve(f, degree=cfg.degree)
    window = cfg.window or [(-1.0, 1.0)] * g.dim
    if len(window) != g.dim:
        raise InputError(f"--window has {len(window)} axes, map dimension is {g.dim}")
    res = cfg.resolution * g.dim if len(cfg.resolution) == 1 else cfg.resolution
    if len(res) != g.dim:
        raise InputError(f"--res has {len(res)} values, map dimension is {g.dim}")
    shifted = [(lo - c, hi - c) for (lo, hi), c in zip(window, x0)]
    try:
        grid = rasterize(f, info, shifted, res, cfg.orbit, V=V, method=cfg.method, threads=cfg.threads)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    sub = extract_sublevel(grid, V, f, info.delta, gamma=cfg.gamma, threads=cfg.threads)
    grid = attach_sublevel(grid, sub)
    stats = compare(grid.classes, grid.mask, band=cfg.band)
    stats["soundness_strict"] = compare(grid.classes, grid.mask)["soundness"]
    grid = translate_region(grid, x0)
    summary = io.region_summary(grid, stats, {"degree": cfg.degree, "method": cfg.method, "x0": x0})
    return grid, summary


def cmd_estimate(cfg: RunConfig) -> int:
    grid, summary = run_estimate(cfg)
    prefix = _prefix(cfg)
    io.write_grid_csv(grid, f"{prefix}.grid.csv")
    io.write_json(f"{prefix}.region.json", summary)
    if cfg.svg:
        if grid.dim != 2:
            print("note: SVG output skipped (only drawn for 2-D maps)", file=sys.stderr)
        else:
            from .plotting import render_region_svg

            render_region_svg(grid, f"{prefix}.region.svg", title=Path(cfg.map).stem)
    if grid.window_limited:
        print("note: estimate is window-limited (no decrement violation inside the window)", file=sys.stderr)
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    from .verify import run_suites

    g, f, x0 = load_problem(cfg)
    info = _spectral(f, cfg)
    if cfg.lyapunov:
        try:
            V = LyapunovSeries.from_json(json.loads(Path(cfg.lyapunov).read_text()))
        except (OSError, json.JSONDecodeError, ValueError, KeyError) as exc:
            raise InputError(f"cannot load series {cfg.lyapunov!r}: {exc}") from exc
    else:
        V = series_solve(f, degree=cfg.degree)
    window = [(lo - c, hi - c) for (lo, hi), c in zip(cfg.window, x0)] if cfg.window else None
    report = run_suites(f, info, V, seed=cfg.seed, window=window, cfg=cfg.orbit)
    io.write_json(f"{_prefix(cfg)}.verify.json", report)
    sys.stdout.write(io.dumps({"passed": report["passed"], "failed": report["failed"]}))
    if not report["passed"]:
        print("property failed: " + ", ".join(report["failed"]), file=sys.stderr)
        return EXIT_MATH
    return EXIT_OK


COMMANDS = {"check": cmd_check, "lyapunov": cmd_lyapunov, "estimate": cmd_estimate, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = config_from_args(args)
        return COMMANDS[cfg.subcommand](cfg)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (HypothesisError, NotAFixedPoint) as exc:
        if args.subcommand == "check":
            sys.stdout.write(io.dumps({"hypotheses_ok": False, "reason": str(exc)}))
        print(f"hypothesis failed: {exc}", file=sys.stderr)
        return EXIT_MATH
    except (GrowthUncertified, EmptySublevel) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MATH


if __name__ == "__main__":
    sys.exit(main())
