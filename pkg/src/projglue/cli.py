"""Command-line front end.

Exit codes: 0 success, 1 mathematical failure with a witness, 2 input error,
3 internal consistency failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .blocks import (
    ParamTriple,
    alternating_mu_for_trace,
    fan_scene,
    quadrilateral_double_scene,
    solve_boundary_torus_params,
)
from .errors import GeometryError, Infeasible, OutsidePolytope, SceneError, TrivialAngle, WallMismatch
from .gluekit import GluingKit, TileSet, certify_convexity, develop
from .tubes import AngleClass, LiftedSL2, Tube, is_special, tube_normal_form

SCENE_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3
BLOCK_COLOURS = ("#cfe3f4", "#f6dcc2", "#d8efd0", "#eadcf2")


class InputError(Exception):
    """Malformed command-line input or file."""


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, default=_plain, allow_nan=True) + "\n"


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def load_json(path: str) -> dict:
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")
        data = json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InputError(f"{path}: expected a JSON object")
    return data


def load_scene(path: str, tol: float | None = None, seed: int | None = None,
               depth: int | None = None) -> GluingKit:
    scene = load_json(path)
    if scene.get("version") != SCENE_VERSION:
        raise InputError(f"unsupported scene version {scene.get('version')!r}")
    if tol is not None:
        scene["tolerance"] = tol
    if seed is not None:
        scene["seed"] = seed
    if depth is not None:
        scene["depth"] = depth
    return GluingKit.from_scene(scene)


# ---------------------------------------------------------------- svg


def render_svg(ts: TileSet, title: str = "", size: int = 800, margin: int = 20) -> str:
    """SVG of a planar development in its chart, with fixed-precision coordinates."""
    if ts.kit.dimension != 2:
        raise InputError("SVG rendering needs a planar scene")
    polys = ts.chart_polygons()
    pts = np.vstack(polys)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    scale = (size - 2 * margin) / max(float((hi - lo).max()), 1e-12)
    colours = {bid: BLOCK_COLOURS[k % len(BLOCK_COLOURS)] for k, bid in enumerate(ts.kit.blocks)}
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    if title:
        out.append(f'<title>{title}</title>')
    for t, poly in zip(ts.tiles, polys):
        xy = (poly - lo) * scale + margin
        coords = " ".join(f"{x:.4f},{size - y:.4f}" for x, y in xy)
        out.append(f'<polygon points="{coords}" fill="{colours[t.block]}" stroke="#333333" '
                   f'stroke-width="0.3000"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- commands


def _tube_from_file(data: dict) -> Tube:
    try:
        if "matrix" in data:
            return tube_normal_form(np.asarray(data["matrix"], dtype=float), int(data.get("lift_index", 0)))
        return Tube.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, TrivialAngle):
            raise
        raise InputError(f"malformed tube: {exc}") from exc


def cmd_classify_tube(args) -> int:
    tube = _tube_from_file(load_json(args.tube))
    verdict = tube.classify()
    report = {"verdict": verdict.verdict.value, "kind": verdict.kind, "trace_margin": verdict.margin,
              "mu": tube.mu, "dimension": tube.d}
    if verdict.verdict is AngleClass.UNIFORMISABLE:
        special, margin = is_special(tube)
        report.update(special=special, special_margin=margin)
        line = f"Uniformisable, {'special' if special else 'not special'}, margin {margin:.6g}"
    elif verdict.verdict is AngleClass.INDETERMINATE:
        line = f"Indeterminate ({verdict.kind}), trace margin {verdict.margin:.3g}"
    else:
        line = str(verdict)
    print(line)
    if args.out:
        _write(args.out, dumps(report))
    return EXIT_OK


def cmd_develop(args) -> int:
    kit = load_scene(args.scene, args.tol, None, args.depth)
    ts = develop(kit, kit.depth)
    _write(args.out, dumps(ts.to_json()))
    if args.svg:
        Path(args.svg).write_text(render_svg(ts, f"development, depth {ts.depth}, {len(ts)} tiles"),
                                  encoding="utf-8")
    if args.out not in (None, "-"):
        print(f"{len(ts)} tiles at depth {ts.depth}")
    return EXIT_OK


def cmd_certify(args) -> int:
    kit = load_scene(args.scene, args.tol, args.seed, args.depth)
    ts = develop(kit, kit.depth)
    cert = certify_convexity(kit, kit.depth, samples=args.samples, seed=kit.seed, tileset=ts)
    report = cert.to_dict()
    report["seed"] = kit.seed
    report["samples"] = args.samples
    if args.out:
        _write(args.out, dumps(report))
    if args.svg:
        status = "certified" if cert.passed else "not certified"
        Path(args.svg).write_text(render_svg(ts, f"{status}, depth {ts.depth}, {len(ts)} tiles"),
                                  encoding="utf-8")
    if cert.passed:
        worst_wall = min((w.margin for w in cert.walls), default=float("inf"))
        worst_corner = min((c.trace_margin for c in cert.corners), default=float("inf"))
        print(f"PASS walls {len(cert.walls)} (min margin {worst_wall:.6g}), "
              f"corners {len(cert.corners)} (min trace margin {worst_corner:.6g})")
        return EXIT_OK
    print("FAIL " + json.dumps(cert.failure, sort_keys=True, default=_plain))
    return EXIT_FAIL


def _parse_range(text: str) -> np.ndarray:
    """``start:stop:num`` (inclusive linspace), a comma list, or one number."""
    try:
        if ":" in text:
            a, b, n = text.split(":")
            return np.linspace(float(a), float(b), int(n))
        return np.array([float(x) for x in text.split(",")])
    except ValueError as exc:
        raise InputError(f"bad range {text!r}") from exc


def scan_row(params: tuple[float, float, float, float]) -> dict:
    a, b, c, theta = (float(x) for x in params)
    row = {"a": a, "b": b, "c": c, "theta": theta, "feasible": False, "status": "",
           "d": None, "mu": None, "mu_prime": None, "t": None, "lambda": None}
    if b == 3.0:
        row["status"] = "boundary-excluded"
        return row
    try:
        res = solve_boundary_torus_params(ParamTriple(a, b, c), theta)
    except OutsidePolytope:
        row["status"] = "infeasible"
        return row
    except Infeasible:
        row["status"] = "no-solution"
        return row
    row.update(feasible=True, status="ok", d=res.dval, mu=res.mu, mu_prime=res.mu_prime,
               t=res.trace, **{"lambda": res.lam})
    return row


SCAN_FIELDS = ("a", "b", "c", "theta", "feasible", "status", "d", "mu", "mu_prime", "t", "lambda")


def cmd_scan(args) -> int:
    grid = list(itertools.product(_parse_range(args.a), _parse_range(args.b), _parse_range(args.c),
                                  _parse_range(args.theta)))
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(scan_row, grid, chunksize=max(1, len(grid) // (4 * args.jobs))))
    else:
        rows = [scan_row(p) for p in grid]
    fmt = args.format or ("json" if args.out and args.out.endswith(".json") else "csv")
    if fmt == "json":
        text = dumps({"rows": rows, "count": len(rows)})
    else:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=SCAN_FIELDS, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: ("" if r[k] is None else repr(r[k]) if isinstance(r[k], float) else r[k])
                             for k in SCAN_FIELDS})
        text = buf.getvalue()
    _write(args.out, text)
    if args.out not in (None, "-"):
        ok = sum(r["feasible"] for r in rows)
        print(f"{len(rows)} rows, {ok} feasible")
    return EXIT_OK


def cmd_scene(args) -> int:
    if args.kind == "quad":
        theta = args.angle
        if args.trace is not None:
            m = alternating_mu_for_trace(theta, args.trace)
        else:
            m = args.mu
        mus = (m, 1.0 / m, m, 1.0 / m)
        scene = quadrilateral_double_scene((theta,) * 4, mus, depth=args.depth, seed=args.seed)
    else:
        g = np.diag([0.5, 0.5, 3.0, 4.0 / 3.0])
        stratum = [[1.0, 0.2, 0.0, 0.0], [0.2, 1.0, 0.0, 0.0]]
        scene = fan_scene(g, stratum, [0.3, 0.2, 1.0, 1.0], depth=args.depth, chart=[1.0, 1.0, 1.0, 1.0])
        scene["seed"] = args.seed
    _write(args.out, dumps(scene))
    return EXIT_OK


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="projglue", description="Convex projective gluing toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("classify-tube", help="classify a tube descriptor")
    s.add_argument("tube", help="tube JSON: {dimension, mu, sl2, lift_index, C} or {matrix, lift_index}")
    s.add_argument("--out", help="write a JSON report")
    s.set_defaults(func=cmd_classify_tube)

    s = sub.add_parser("develop", help="develop a scene into tiles")
    s.add_argument("scene")
    s.add_argument("--depth", type=int)
    s.add_argument("--tol", type=float)
    s.add_argument("--out", default="-", help="tiles JSON (default stdout)")
    s.add_argument("--svg", help="SVG render of a planar development")
    s.set_defaults(func=cmd_develop)

    s = sub.add_parser("certify", help="certify convexity of a scene")
    s.add_argument("scene")
    s.add_argument("--depth", type=int)
    s.add_argument("--samples", type=int, default=100_000)
    s.add_argument("--seed", type=int)
    s.add_argument("--tol", type=float)
    s.add_argument("--out", help="certificate JSON")
    s.add_argument("--svg", help="SVG render of the development")
    s.set_defaults(func=cmd_certify)

    s = sub.add_parser("scan", help="scan boundary-torus parameters")
    s.add_argument("--a", default="1.01:1.5:10")
    s.add_argument("--b", default="3.5:6:10")
    s.add_argument("--c", default="1.1:4:10")
    s.add_argument("--theta", default=str(np.pi / 6))
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--format", choices=("csv", "json"))
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_scan)

    s = sub.add_parser("scene", help="write a fixture scene")
    s.add_argument("kind", choices=("quad", "fan"))
    s.add_argument("--angle", type=float, default=np.pi / 5)
    s.add_argument("--mu", type=float, default=1.0, help="alternating side parameter")
    s.add_argument("--trace", type=float, help="pick the side parameter reaching this corner trace")
    s.add_argument("--depth", type=int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_scene)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_INPUT
    try:
        return args.func(args)
    except WallMismatch as exc:
        print(f"error: wall mismatch on edge {exc.edge}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except TrivialAngle as exc:
        print(f"error: TrivialAngle: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, SceneError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except GeometryError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
