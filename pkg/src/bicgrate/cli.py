"""Command line front end: threshold tables, bound-state searches, reflection
sweeps, field maps and integer families for three or four open channels.

Records go out as JSON, grids and sweeps as CSV.  Every output file gets a
``<file>.manifest.json`` next to it (schema v1) describing how it was made.
"""
import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .bound_states import (
    BoundStateRecord, Symmetry, diophantine_N, eps_on_curve, find_below,
    find_continuum_I, find_continuum_II,
)
from .channels import BlochPoint, RegionKind, RegionTag, threshold_table
from .errors import BicError, DegenerateTriple, GateFailed, NoBracket, NoRoot, SingularSystem
from .fields import GridSpec, bound_field, export_csv, export_sidecar, scattering_field
from .lattice_sums import DEFAULT_TOL, ArrayConfig, determinant
from .scattering import solve

SCHEMA = "v1"
EXIT_OK, EXIT_USAGE, EXIT_GATE, EXIT_EMPTY = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _g(v):
    v = float(v) + 0.0     # folds -0.0 to 0.0
    return "nan" if math.isnan(v) else "%.17g" % v


def _workers():
    try:
        n = int(os.environ.get("BICGRATE_THREADS", "0"))
    except ValueError:
        n = 0
    cpu = os.cpu_count() or 1
    return max(1, min(n, cpu)) if n > 0 else cpu


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def make_manifest(command, inputs, outputs):
    """Run description; the hash covers the inputs only, not the timestamp."""
    canon = json.dumps(_jsonable(inputs), sort_keys=True, separators=(",", ":"))
    return {
        "schema": SCHEMA,
        "command": command,
        "version": __version__,
        "inputs": _jsonable(inputs),
        "input_hash": hashlib.sha256(canon.encode()).hexdigest(),
        "outputs": list(outputs),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


def _emit(text, out, command, inputs):
    if out in (None, "-"):
        sys.stdout.write(text)
        return
    with open(out, "w", newline="") as fh:
        fh.write(text)
    with open(out + ".manifest.json", "w") as fh:
        json.dump(make_manifest(command, inputs, [out]), fh, indent=2, sort_keys=True)


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _inputs(args):
    return {k: v for k, v in vars(args).items() if k not in ("func", "out")}


# --------------------------------------------------------------------------
# subcommands

def cmd_thresholds(args):
    rows = [(i, _g(e)) for i, e in threshold_table(args.kx, args.nmax)]
    _emit(_csv_text(["index", "energy"], rows), args.out, "thresholds", _inputs(args))
    return EXIT_OK


def _config(args, h=None):
    return ArrayConfig(args.R, args.eps, args.a, h)


def cmd_bound_search(args):
    try:
        if args.region == "below":
            if args.h is None:
                raise UsageError("bound-search --region below needs --h")
            recs = find_below(_config(args, args.h), args.kx, tol=args.tol)
        elif args.region == "c1":
            recs = find_continuum_I(_config(args), args.a, args.kx, args.nmax, tol=args.tol)
        else:
            recs = find_continuum_II(_config(args), args.a, args.nmax, args.lmax,
                                     n_grid=args.grid, tol=args.tol)
    except GateFailed as exc:
        g = exc.gate
        msg = {"error": "GateFailed", "message": str(exc)}
        if g is not None:
            msg.update(lhs=g.lhs, rhs=g.rhs, bound_kind=g.bound_kind)
        print(json.dumps(_jsonable(msg)), file=sys.stderr)
        return EXIT_GATE
    except (NoRoot, NoBracket) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_EMPTY
    doc = {"schema": SCHEMA, "R": args.R, "eps_c": args.eps,
           "records": [r.to_dict() for r in recs]}
    _emit(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n",
          args.out, "bound-search", _inputs(args))
    return EXIT_OK if recs else EXIT_EMPTY


def _sweep_cell(task):
    R, eps, a, kx, h, k, tol = task
    try:
        sol = solve(ArrayConfig(R, eps, a, h), BlochPoint(k, kx), tol=tol)
    except SingularSystem:
        return h, k, math.nan, math.nan, "singular"
    except BicError as exc:
        return h, k, math.nan, math.nan, type(exc).__name__
    return h, k, abs(sol.refl[0]) ** 2, sol.flux_error, "ok"


def cmd_scatter_sweep(args):
    hs = np.linspace(args.h_range[0], args.h_range[1], args.grid[0])
    ks = np.linspace(args.k_range[0], args.k_range[1], args.grid[1])
    tasks = [(args.R, args.eps, args.a, args.kx, float(h), float(k), args.tol)
             for h in hs for k in ks]
    n = _workers()
    if n > 1 and len(tasks) > 64:
        with ProcessPoolExecutor(max_workers=n) as pool:
            rows = list(pool.map(_sweep_cell, tasks, chunksize=max(1, len(tasks) // (8 * n))))
    else:
        rows = [_sweep_cell(t) for t in tasks]
    out = [(_g(h), _g(k), _g(r), _g(f), s) for h, k, r, f, s in rows]
    _emit(_csv_text(["h", "k", "specular", "flux_error", "status"], out),
          args.out, "scatter-sweep", _inputs(args))
    if rows and all(r[4] != "ok" for r in rows):
        return EXIT_EMPTY
    return EXIT_OK


def _record_from_dict(d):
    region = d["region"]
    if region == "below":
        tag = RegionTag(RegionKind.BELOW, 0)
    else:
        tag = RegionTag(RegionKind.CONTINUUM, int(region.split("-")[1]))
    return BoundStateRecord(
        region=tag, kx=d["kx"], k=d["k"], h=d["h"], a=d["a"],
        residual_delta=d["residual_delta"], symmetry=Symmetry(d["symmetry"]),
        indices=tuple(d["indices"]) if d.get("indices") else None,
        approx_k=d.get("approx_k"), family=d.get("family", ""), extra=d.get("extra", {}))


def _bloch_check(grid, fn, kx, samples=64):
    """max |E(x+1, z) - exp(i kx) E(x, z)| over a spread of valid samples."""
    ok = np.argwhere(np.isfinite(grid.values))
    if ok.size == 0:
        return None
    pick = ok[np.linspace(0, len(ok) - 1, min(samples, len(ok))).astype(int)]
    xs = grid.x[pick[:, 0]] + 1.0
    zs = grid.z[pick[:, 1]]
    shifted = fn(xs, zs)
    base = grid.values[pick[:, 0], pick[:, 1]]
    return float(np.max(np.abs(shifted - np.exp(1j * kx) * base)))


def cmd_field_map(args):
    grid_spec = GridSpec(x_range=tuple(args.x_range), nx=args.nx, nz=args.nz,
                    z_range=tuple(args.z_range) if args.z_range else None)
    from .fields import source_field
    if args.record_file:
        with open(args.record_file) as fh:
            doc = json.load(fh)
        R = doc.get("R", args.R)
        eps = doc.get("eps_c", args.eps)
        rec = _record_from_dict(doc["records"][args.index])
        cfg = ArrayConfig(R, eps)
        grid = bound_field(rec, cfg, grid_spec, tol=args.tol)
        full = ArrayConfig(R, eps, rec.a, rec.h)
        pt = BlochPoint(rec.k, rec.kx)
        el = complex(*grid.meta["e_left"])
        er = complex(*grid.meta["e_right"])

        def fn(x, z):
            return source_field(pt, full, el, er, x, z, args.tol)
    else:
        if args.scatter_at is None or args.h is None:
            raise UsageError("field-map needs --record-file, or --scatter-at with --h")
        cfg = ArrayConfig(args.R, args.eps, args.a, args.h)
        pt = BlochPoint(args.scatter_at, args.kx)
        try:
            sol = solve(cfg, pt, tol=args.tol)
        except SingularSystem as exc:
            print(json.dumps({"error": "SingularSystem", "message": str(exc)}), file=sys.stderr)
            return EXIT_EMPTY
        grid = scattering_field(sol, grid_spec, tol=args.tol)

        def fn(x, z):
            return source_field(pt, cfg, sol.e_left, sol.e_right, x, z, args.tol) + sol.incident(x, z)
    if args.out in (None, "-"):
        raise UsageError("field-map needs --out")
    export_csv(grid, args.out)
    side = args.out + ".json"
    export_sidecar(grid, side, {"bloch_residual": _bloch_check(grid, fn, grid.meta["kx"])})
    with open(args.out + ".manifest.json", "w") as fh:
        json.dump(make_manifest("field-map", _inputs(args), [args.out, side]), fh,
                  indent=2, sort_keys=True)
    return EXIT_OK


def cmd_diophantine(args):
    try:
        sols = diophantine_N(args.channels, args.bound, tol=args.tol)
    except DegenerateTriple as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_EMPTY
    rows = []
    for s in sols:
        c = s.curve_constant
        eps = math.nan
        if args.R is not None and c is not None and abs(c.imag) < 1e-9:
            try:
                eps = eps_on_curve(c.real, s.k, args.R)
            except ValueError:
                pass
        det = math.nan
        if args.R is not None and args.eps is not None:
            cfg = ArrayConfig(args.R, args.eps, s.a, s.h)
            det = abs(determinant(BlochPoint(s.k, s.kx), cfg, args.tol))
        rows.append((" ".join(map(str, s.ns)), _g(s.kx), _g(s.h), _g(s.k), s.channels,
                     _g(s.a), _g(c.real), _g(c.imag), int(s.parity_ok), _g(eps), _g(det)))
    header = ["ns", "kx", "h", "k", "channels", "a", "curve_re", "curve_im",
              "parity_ok", "eps_c_on_curve", "abs_det"]
    _emit(_csv_text(header, rows), args.out, "diophantine", _inputs(args))
    return EXIT_OK if rows else EXIT_EMPTY


# --------------------------------------------------------------------------

def _add_material(p, need_h=False):
    p.add_argument("--R", type=float, default=0.1, help="cylinder radius (period units)")
    p.add_argument("--eps", type=float, default=1.5, help="dielectric constant of the cylinders")
    p.add_argument("--a", type=float, default=0.0, help="shift of the upper array")
    p.add_argument("--h", type=float, default=None, required=need_h,
                   help="half the distance between the arrays")


def build_parser():
    parser = argparse.ArgumentParser(prog="bicgrate", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--tol", type=float, default=DEFAULT_TOL, help="absolute sum tolerance")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("thresholds", help="diffraction thresholds at fixed kx")
    p.add_argument("--kx", type=float, required=True)
    p.add_argument("--nmax", type=int, default=2)
    p.add_argument("--out")
    p.set_defaults(func=cmd_thresholds)

    p = sub.add_parser("bound-search", help="locate bound states")
    p.add_argument("--region", choices=["below", "c1", "c2"], required=True)
    p.add_argument("--kx", type=float, default=0.0)
    p.add_argument("--nmax", type=int, default=4)
    p.add_argument("--lmax", type=int, default=8)
    p.add_argument("--grid", type=int, default=2048, help="kx grid for two open channels")
    _add_material(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bound_search)

    p = sub.add_parser("scatter-sweep", help="specular reflection over an (h, k) grid")
    p.add_argument("--kx", type=float, required=True)
    p.add_argument("--h-range", type=float, nargs=2, required=True, metavar=("LO", "HI"))
    p.add_argument("--k-range", type=float, nargs=2, required=True, metavar=("LO", "HI"))
    p.add_argument("--grid", type=int, nargs=2, default=[64, 64], metavar=("NH", "NK"))
    _add_material(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_scatter_sweep)

    p = sub.add_parser("field-map", help="field on a grid as CSV")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--record-file", help="JSON written by bound-search")
    src.add_argument("--scatter-at", type=float, metavar="K", help="wavenumber of the incident wave")
    p.add_argument("--index", type=int, default=0, help="record to use from --record-file")
    p.add_argument("--kx", type=float, default=0.0)
    p.add_argument("--nx", type=int, default=256)
    p.add_argument("--nz", type=int, default=512)
    p.add_argument("--x-range", type=float, nargs=2, default=[0.0, 1.0])
    p.add_argument("--z-range", type=float, nargs=2, default=None)
    _add_material(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_field_map)

    p = sub.add_parser("diophantine", help="integer families for 3 or 4 open channels")
    p.add_argument("--channels", type=int, choices=[3, 4], required=True)
    p.add_argument("--bound", type=int, required=True)
    p.add_argument("--R", type=float, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_diophantine)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
