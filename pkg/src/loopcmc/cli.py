"""Command line front end.

Exit codes: 0 success, 1 fatal run error (or too many failed points),
2 configuration / parse error, 3 nothing could be computed.
"""

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from .errors import BigCellFailure, EmptyResultError, ExtractionFailed, InvalidArgument, LoopCMCError
from .factorization import birkhoff_split
from .geometry import (
    EQUATIONS,
    fundamental_data,
    harmonic_residual,
    normal_norm_defect,
    pde_residual,
    tangency_residual,
)
from .io import (
    grid_from_columns,
    load_frame_field,
    read_fields_csv,
    read_obj,
    save_frame_field,
    write_fields_csv,
    write_json,
    write_obj,
)
from .loops import DEFAULT_N, TruncatedLoop
from .pipeline import (
    DEFAULT_SUBSTEPS,
    Grid,
    build_extended_framing,
    classify_connection,
    extract_normalized_potentials,
    maurer_cartan_form,
)
from .potentials import BUILTIN_GRIDS, BUILTIN_NAMES, potential_from_config
from .sym import SurfacePatch, sym_immersion

log = logging.getLogger("loopcmc")

EXIT_OK, EXIT_FATAL, EXIT_CONFIG, EXIT_EMPTY = 0, 1, 2, 3
CONFIG_KEYS = {"potential", "grid", "truncation", "lambdas", "H", "substeps", "output_dir", "report"}
REPORT_KEYS = {"figures", "max_failure_fraction"}
DEFAULT_BUILTIN_POINTS = 33

BUILTIN_NOTES = {
    "hyperbolic_cylinder": "H = 1/2, Q = R = -1/4: hyperbolic cylinder",
    "circular_cylinder": "H = 1/2, Q = R = 1/4: circular cylinder",
    "pseudosphere": "H = 1/2, Q = R = 0: totally umbilic pseudosphere of radius 2",
    "bscroll_example": "H = 1, Q = 0, R = y - 1/2: B-scroll",
}


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration


def parse_grid(value):
    if isinstance(value, str):
        parts = [p.strip() for p in value.split(",")]
        if len(parts) != 6:
            raise ConfigError("grid needs six comma-separated values xmin,xmax,ymin,ymax,nx,ny")
        value = parts
    if isinstance(value, dict):
        keys = ("x_min", "x_max", "y_min", "y_max", "nx", "ny")
        if set(value) != set(keys):
            raise ConfigError("grid object needs exactly the keys " + ", ".join(keys))
        value = [value[k] for k in keys]
    if not isinstance(value, (list, tuple)) or len(value) != 6:
        raise ConfigError("grid must be a list of six values")
    try:
        xmin, xmax, ymin, ymax = (float(v) for v in value[:4])
        nx, ny = (float(v) for v in value[4:])
    except (TypeError, ValueError) as exc:
        raise ConfigError("grid values must be numbers: %s" % exc)
    if nx != int(nx) or ny != int(ny):
        raise ConfigError("grid point counts must be integers")
    try:
        return Grid(xmin, xmax, ymin, ymax, int(nx), int(ny))
    except InvalidArgument as exc:
        raise ConfigError(str(exc))


def load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError("cannot read config: %s" % exc)
    except json.JSONDecodeError as exc:
        raise ConfigError("config is not valid JSON: %s" % exc)
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(cfg) - CONFIG_KEYS
    if unknown:
        raise ConfigError("unknown config keys: %s" % ", ".join(sorted(unknown)))
    if "potential" not in cfg:
        raise ConfigError("config needs a potential")
    rep = cfg.get("report", {})
    if not isinstance(rep, dict) or set(rep) - REPORT_KEYS:
        raise ConfigError("report accepts only: %s" % ", ".join(sorted(REPORT_KEYS)))
    return cfg


def resolve_run(cfg, args):
    """Merge config and command line into concrete run settings."""
    try:
        pot = potential_from_config(cfg["potential"])
    except InvalidArgument as exc:
        raise ConfigError("potential: %s" % exc)
    if args.grid is not None:
        grid = parse_grid(args.grid)
    elif "grid" in cfg:
        grid = parse_grid(cfg["grid"])
    elif pot.name in BUILTIN_GRIDS:
        grid = Grid(*BUILTIN_GRIDS[pot.name], DEFAULT_BUILTIN_POINTS, DEFAULT_BUILTIN_POINTS)
    else:
        raise ConfigError("config needs a grid")

    N = args.truncation if args.truncation is not None else cfg.get("truncation", DEFAULT_N)
    if not isinstance(N, int) or isinstance(N, bool) or N < 4:
        raise ConfigError("truncation must be an integer >= 4")
    substeps = args.substeps if args.substeps is not None else cfg.get("substeps", DEFAULT_SUBSTEPS)
    if not isinstance(substeps, int) or isinstance(substeps, bool) or substeps < 1:
        raise ConfigError("substeps must be a positive integer")
    lambdas = args.lam if args.lam else cfg.get("lambdas", [1.0])
    if not isinstance(lambdas, list) or not lambdas:
        raise ConfigError("lambdas must be a non-empty list")
    try:
        lambdas = [float(v) for v in lambdas]
    except (TypeError, ValueError):
        raise ConfigError("lambdas must be numbers")
    if any(not (v > 0 and math.isfinite(v)) for v in lambdas):
        raise ConfigError("lambda values must be positive")
    H = cfg.get("H", pot.H)
    if H is None or not isinstance(H, (int, float)) or H == 0:
        raise ConfigError("a nonzero H is required")
    rep = cfg.get("report", {})
    frac = rep.get("max_failure_fraction", 0.5)
    if not isinstance(frac, (int, float)) or not 0 <= frac <= 1:
        raise ConfigError("max_failure_fraction must lie in [0, 1]")
    out = args.output_dir or cfg.get("output_dir") or "loopcmc_out"
    return {"potential": pot, "grid": grid, "N": N, "substeps": substeps, "lambdas": lambdas,
            "H": float(H), "figures": bool(rep.get("figures", True)), "max_failure_fraction": float(frac),
            "output_dir": out}


# ---------------------------------------------------------------------------
# reports


def _clean(obj):
    """JSON-safe copy: NaN/inf become None, numpy scalars become floats."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def surface_report(patch, data):
    """Residuals of a measured patch, each as max / mean / argmax."""
    res = {eq: pde_residual(data, eq).to_dict() for eq in EQUATIONS}
    res["gauss_relation"] = data.summary("gauss_defect")
    res["null_E"] = data.summary("E")
    res["null_G"] = data.summary("G")
    res["tangency"] = tangency_residual(patch)
    res["harmonic"] = {"max": harmonic_residual(patch.normals, patch.grid)}
    res["normal_norm"] = {"max": normal_norm_defect(patch)}
    measured = {name: data.summary(name) for name in ("H", "Q", "R", "omega", "K")}
    valid = data.valid
    if np.any(valid):
        measured["H"]["min"] = float(np.min(data.H[valid]))
        measured["H"]["max_signed"] = float(np.max(data.H[valid]))
    return {"residuals": res, "measured": measured}


def run_pipeline(settings):
    pot, grid = settings["potential"], settings["grid"]
    os.makedirs(settings["output_dir"], exist_ok=True)
    log.info("building framing for %s on %dx%d grid, N=%d", pot.name, grid.nx, grid.ny, settings["N"])
    field = build_extended_framing(pot, grid, settings["substeps"], settings["N"])
    save_frame_field(os.path.join(settings["output_dir"], "frame_field.npz"), field)
    mc = maurer_cartan_form(field)
    cls = classify_connection(field)
    diag = field.diagnostics
    live = ~field.failure_mask
    base = {
        "potential": {"name": pot.name, "kind": pot.meta.get("kind"), "H": settings["H"]},
        "grid": grid.to_list(),
        "truncation": settings["N"],
        "substeps": settings["substeps"],
        "failure_fraction": field.failure_fraction,
        "tail_loss": float(np.max(diag["tail"][live])),
        "rcond_min": float(np.min(diag["rcond"][live])),
        "consistency_max": float(np.nanmax(diag["consistency"])),
        "det_defect_max": float(np.nanmax(diag["det_defect"])),
        "classification": {"dominant": cls.dominant, "counts": cls.counts},
        "maurer_cartan": mc.summary,
    }
    reports = []
    for lam in settings["lambdas"]:
        tag = "lam%g" % lam
        patch = sym_immersion(field, lam, settings["H"])
        data = fundamental_data(patch)
        out = settings["output_dir"]
        write_obj(os.path.join(out, "surface_%s.obj" % tag), patch)
        write_fields_csv(os.path.join(out, "fields_%s.csv" % tag), patch, data)
        report = dict(base, lambda0=lam, **surface_report(patch, data))
        write_json(os.path.join(out, "report_%s.json" % tag), _clean(report))
        if settings["figures"]:
            from .plotting import plot_fields, plot_surface

            plot_surface(os.path.join(out, "surface_%s.png" % tag), patch, "%s, lambda0 = %g" % (pot.name, lam))
            plot_fields(os.path.join(out, "fields_%s.png" % tag), patch, data, diag["rcond"])
        log.info("lambda0=%g: wrote %s outputs", lam, tag)
        reports.append(report)
    return field, reports


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(args):
    try:
        if not args.config:
            raise ConfigError("run requires --config")
        settings = resolve_run(load_config(args.config), args)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    try:
        field, reports = run_pipeline(settings)
    except EmptyResultError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_EMPTY
    except LoopCMCError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_FATAL
    if not args.quiet:
        for r in reports:
            res = r["residuals"]
            print("lambda0=%g class=%s failed=%.3f H=[%.6g, %.6g] gauss=%.3g sinh=%.3g cosh=%.3g liouville=%.3g"
                  % (r["lambda0"], r["classification"]["dominant"], r["failure_fraction"],
                     r["measured"]["H"].get("min", float("nan")), r["measured"]["H"].get("max_signed", float("nan")),
                     res["gauss_general"]["max"], res["sinh"]["max"], res["cosh"]["max"], res["liouville"]["max"]))
    if field.failure_fraction > settings["max_failure_fraction"]:
        print("error: failure fraction %.3f exceeds %.3f" % (field.failure_fraction, settings["max_failure_fraction"]),
              file=sys.stderr)
        return EXIT_FATAL
    return EXIT_OK


def cmd_list_examples(args):
    for name in BUILTIN_NAMES:
        print(name if args.quiet else "%-20s %s" % (name, BUILTIN_NOTES[name]))
    return EXIT_OK


def cmd_factorize_demo(args):
    try:
        text = sys.stdin.read() if args.input == "-" else open(args.input).read()
        loop = TruncatedLoop.from_text(text)
        if args.truncation is not None:
            if args.truncation < loop.N:
                raise InvalidArgument("truncation smaller than the loop's support")
            loop = loop.promote(args.truncation)
    except (OSError, InvalidArgument, ValueError) as exc:
        print("parse error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    try:
        res = birkhoff_split(loop, args.convention)
    except BigCellFailure as exc:
        print("big-cell failure: %s" % exc, file=sys.stderr)
        return EXIT_EMPTY
    print("# normalized_factor")
    print(res.normalized_factor.to_text())
    print("# complement_factor")
    print(res.complement_factor.to_text())
    print("# residual %r" % res.residual)
    print("# condition_estimate %r" % res.condition_estimate)
    return EXIT_OK


def cmd_verify(args):
    try:
        verts, obj_normals, _, obj_grid = read_obj(args.mesh)
        cols = read_fields_csv(args.fields)
        grid = obj_grid or grid_from_columns(cols["x"], cols["y"])
        n = grid.nx * grid.ny
        if verts.shape[0] != n or cols["x"].size != n:
            raise InvalidArgument("mesh and field file sizes do not match the grid")
        normals = np.stack([cols["n1"], cols["n2"], cols["n3"]], axis=-1)
        if not np.any(np.isfinite(normals)) and obj_normals is not None:
            normals = obj_normals
        mask = cols["mask"].astype(bool).reshape(grid.shape)
        patch = SurfacePatch(grid, verts.reshape(grid.shape + (3,)), normals.reshape(grid.shape + (3,)), mask)
    except (OSError, InvalidArgument, ValueError, KeyError) as exc:
        print("parse error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    if np.all(patch.failure_mask):
        print("error: every point is masked", file=sys.stderr)
        return EXIT_EMPTY
    data = fundamental_data(patch)
    report = _clean(dict(grid=grid.to_list(), **surface_report(patch, data)))
    if args.output_dir:
        os.makedirs(args.output_dir, exist_ok=True)
        write_fields_csv(os.path.join(args.output_dir, "verified_fields.csv"), patch, data)
        write_json(os.path.join(args.output_dir, "verify_report.json"), report)
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_extract(args):
    try:
        field = load_frame_field(args.frame_field)
    except (OSError, ValueError, KeyError) as exc:
        print("parse error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    try:
        pot = extract_normalized_potentials(field)
    except ExtractionFailed as exc:
        print("extraction failed at %s: %s" % (exc.location, exc), file=sys.stderr)
        return EXIT_EMPTY
    g = field.grid
    lines = ["axis,t,exponent,a11,a12,a21,a22"]
    for axis, ts, terms in (("x", g.xs, pot.terms_x(g.xs)), ("y", g.ys, pot.terms_y(g.ys))):
        for k, arr in sorted(terms.items()):
            for t, A in zip(ts, arr):
                lines.append(",".join([axis, repr(float(t)), str(k)] + [repr(float(v)) for v in A.ravel()]))
    diag = _clean(pot.meta["diagnostics"])
    text = "\n".join(lines) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if not args.quiet:
        print(json.dumps(diag, sort_keys=True), file=sys.stderr)
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", help="suppress progress output")
    p = argparse.ArgumentParser(prog="loopcmc", description="Timelike CMC surfaces from loop-group potentials.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="build a surface from a JSON config")
    r.add_argument("--config", help="JSON run configuration")
    r.add_argument("--output-dir")
    r.add_argument("--truncation", type=int, help="loop truncation order N")
    r.add_argument("--lambda", dest="lam", type=float, action="append", help="spectral value (repeatable)")
    r.add_argument("--grid", help='"xmin,xmax,ymin,ymax,nx,ny"')
    r.add_argument("--substeps", type=int, help="RK4 steps per grid interval")
    r.set_defaults(func=cmd_run)

    sub.add_parser("list-examples", parents=[common], help="list builtin potentials").set_defaults(
        func=cmd_list_examples)

    f = sub.add_parser("factorize-demo", parents=[common], help="Birkhoff-split a loop in text form")
    f.add_argument("input", nargs="?", default="-", help="loop file, '-' for stdin")
    f.add_argument("--convention", choices=("minus_plus", "plus_minus"), default="minus_plus")
    f.add_argument("--truncation", type=int)
    f.set_defaults(func=cmd_factorize_demo)

    v = sub.add_parser("verify", parents=[common], help="measure an exported mesh")
    v.add_argument("--mesh", required=True)
    v.add_argument("--fields", required=True, help="field CSV holding the normals")
    v.add_argument("--output-dir")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("extract", parents=[common], help="normalized potentials of a stored frame field")
    e.add_argument("--frame-field", required=True)
    e.add_argument("--output")
    e.set_defaults(func=cmd_extract)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s",
                        stream=sys.stderr)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
