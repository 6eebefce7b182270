"""Command-line front end: ``esdl <subcommand> [options]``."""
from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np

from .geometry import PartitionConfig, classify_point, polygon_vertices
from .orbits import OrbitClass, classify_orbit, default_ladder, encode_grid, real_fixed_points
from .raster import RasterImage, encode_image, overlay_partition, render_classification
from .singular import cached_singular_data, interlacing_holds, postsingular_orbit, write_orbit_csv, write_singular_csv
from .verify import CHECK_IDS, ConfigError, UnknownCheck, _nu, exit_status, parse_config, run_all, run_check


def _common(parser):
    g = parser.add_argument_group("configuration (flags override --config)")
    g.add_argument("--config", help="key = value file")
    g.add_argument("--p", type=int)
    g.add_argument("--lambda", dest="lambda_", type=float)
    g.add_argument("--nu", type=float)
    g.add_argument("--q", type=float)
    g.add_argument("--escape-radius", type=float)
    g.add_argument("--budget", type=int)
    g.add_argument("--viewport", help="x_lo,x_hi,y_lo,y_hi or a single half-width")
    g.add_argument("--resolution", help="WxH or N")
    g.add_argument("--t-max", type=float)
    g.add_argument("--out", help="output directory")
    g.add_argument("--cache", help="cache directory (ESDL_CACHE_DIR wins)")
    g.add_argument("--threads", type=int)


def _config(args):
    flags = {
        "p": args.p,
        "lambda": args.lambda_,
        "nu": args.nu,
        "q": args.q,
        "escape_radius": args.escape_radius,
        "budget": args.budget,
        "viewport": args.viewport,
        "resolution": args.resolution,
        "t_max": args.t_max,
        "out": args.out,
        "cache": args.cache,
        "threads": args.threads,
    }
    return parse_config(args.config, flags)


def _out(config) -> Path:
    d = Path(config.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_render(args) -> int:
    config = _config(args)
    P = config.params
    R, ladder = default_ladder(P, config.R)
    grid = config.grid()
    codes, image = render_classification(P, grid, config.budget, R, ladder, threads=config.threads)
    out = _out(config)
    (out / "render.pgm").write_bytes(encode_image(image))
    (out / "classification.esdl").write_bytes(encode_grid(codes, config.budget))
    written = ["render.pgm", "classification.esdl"]
    if args.overlay:
        part = PartitionConfig(P.p, _nu(config), config.q)
        (out / "overlay.ppm").write_bytes(encode_image(overlay_partition(image, grid, part)))
        written.append("overlay.ppm")
    counts = np.bincount(codes.ravel(), minlength=len(OrbitClass))
    for tag in OrbitClass:
        print(f"{tag.name:22s} {counts[tag]}")
    print("wrote", ", ".join(str(out / w) for w in written))
    return 0


def _parse_complex(text: str) -> complex:
    return complex(text.replace(" ", "").replace("i", "j"))


def cmd_orbit(args) -> int:
    config = _config(args)
    P = config.params
    R, ladder = default_ladder(P, config.R)
    rec = classify_orbit(P, _parse_complex(args.z), config.budget, R, ladder)
    print(f"seed {rec.seed}  verdict {rec.verdict.name}  escape_entry {rec.escape_entry}  fast_level {rec.fast_level}")
    path = _out(config) / "orbit.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "log_abs", "re", "im"])
        for n, pt in enumerate(rec.points):
            z = pt.to_complex() if pt.representable else complex(math.nan, math.nan)
            w.writerow([n, repr(pt.log_abs), repr(z.real), repr(z.imag)])
    print("wrote", path)
    return 0


def cmd_singular(args) -> int:
    config = _config(args)
    P = config.params
    data = cached_singular_data(P, config.t_max, config.cache_dir)
    orbit = postsingular_orbit(P, config.budget, config.t_max)
    out = _out(config)
    write_singular_csv(P, data, out / "singular.csv")
    write_orbit_csv(orbit, out / "postsingular.csv")
    print(f"zeros on V_0: {len(data.zeros_t)}  critical points: {len(data.crit_t)}  interlaced: {interlacing_holds(data)}")
    print(f"postsingular max imaginary residual: {orbit.max_imag_residual:.3e}")
    print("wrote", out / "singular.csv", "and", out / "postsingular.csv")
    return 0


def cmd_regions(args) -> int:
    config = _config(args)
    part = PartitionConfig(config.p, _nu(config), config.q)
    print(f"p={part.p} nu={part.nu!r} q={part.q!r}")
    for k, v in enumerate(polygon_vertices(part)):
        print(f"vertex {k}: {v.real!r} {v.imag!r}")
    for text in args.z or []:
        print(f"{text}: {classify_point(part, _parse_complex(text))}")
    grid = config.grid()
    blank = RasterImage(grid.px_w, grid.px_h, 1, bytes(grid.px_w * grid.px_h))
    path = _out(config) / "regions.ppm"
    path.write_bytes(encode_image(overlay_partition(blank, grid, part)))
    print("wrote", path)
    return 0


def cmd_fixed_points(args) -> int:
    config = _config(args)
    fps = real_fixed_points(config.params, args.a, args.b)
    path = _out(config) / "fixed_points.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x_star", "multiplier", "kind"])
        for fp in fps:
            w.writerow([repr(fp.x_star), repr(fp.multiplier), fp.kind.value])
            print(f"x* = {fp.x_star!r}  multiplier = {fp.multiplier!r}  {fp.kind.value}")
    if not fps:
        print(f"no fixed points in [{args.a}, {args.b}]")
    print("wrote", path)
    return 0


def cmd_verify(args) -> int:
    config = _config(args)
    if args.all or not args.check:
        reports = run_all(config, parallel=args.parallel)
    else:
        reports = [run_check(config, cid) for cid in args.check]
    for r in reports:
        tail = f"  ({r.notes})" if r.status == "SKIPPED" else ""
        print(f"{r.check_id:14s} {r.status}{tail}")
    print("reports in", config.out_dir)
    return exit_status(reports)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="esdl", description="Dynamics of lam * sum_k exp(w^k z): rendering and checks.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="classify a viewport and write PGM + classification grid")
    _common(p)
    p.add_argument("--overlay", action="store_true", help="also write the partition overlay as PPM")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("orbit", help="classify one seed and write its orbit as CSV")
    _common(p)
    p.add_argument("--z", required=True, help="seed, e.g. 1.5+0.2j")
    p.set_defaults(func=cmd_orbit)

    p = sub.add_parser("singular", help="zeros, critical points and postsingular orbits on V_0")
    _common(p)
    p.set_defaults(func=cmd_singular)

    p = sub.add_parser("regions", help="partition data, point membership and an outline PPM")
    _common(p)
    p.add_argument("--z", action="append", help="point to classify (repeatable)")
    p.set_defaults(func=cmd_regions)

    p = sub.add_parser("fixed-points", help="real fixed points in [a, b]")
    _common(p)
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--b", type=float, default=math.pi / 2)
    p.set_defaults(func=cmd_fixed_points)

    p = sub.add_parser("verify", help="run verification checks")
    _common(p)
    p.add_argument("--check", action="append", metavar="ID", help=f"one of {', '.join(CHECK_IDS)} (repeatable)")
    p.add_argument("--all", action="store_true")
    p.add_argument("--parallel", action="store_true", help="run independent checks concurrently")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UnknownCheck) as exc:
        msg = exc.args[0] if isinstance(exc, UnknownCheck) else str(exc)
        print(f"error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
