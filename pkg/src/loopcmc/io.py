"""File formats: OBJ meshes, per-point field CSV, frame-field archives.

Floats are written with ``repr`` so every value round-trips exactly.
"""

import csv
import json

import numpy as np

from .errors import InvalidArgument
from .pipeline import FrameField, Grid

FIELD_COLUMNS = ("x", "y", "u1", "u2", "u3", "n1", "n2", "n3",
                 "E", "F", "G", "omega", "Q", "R", "H", "K", "mask")


def _fmt(v):
    return repr(float(v))


def write_obj(path, patch):
    """Vertices in row-major (x index outer) order, quads over unmasked cells."""
    g = patch.grid
    nx, ny = g.shape
    lines = ["# loopcmc surface", "# grid " + " ".join(_fmt(v) for v in g.to_list()[:4]) + " %d %d" % (nx, ny),
             "# lambda0 " + _fmt(patch.lambda0)]
    for p in patch.points.reshape(-1, 3):
        lines.append("v " + " ".join(_fmt(c) for c in p))
    has_n = patch.normals is not None
    if has_n:
        for n in patch.normals.reshape(-1, 3):
            lines.append("vn " + " ".join(_fmt(c) for c in n))
    live = ~patch.failure_mask
    for i in range(nx - 1):
        for j in range(ny - 1):
            if live[i, j] and live[i + 1, j] and live[i + 1, j + 1] and live[i, j + 1]:
                idx = [i * ny + j + 1, (i + 1) * ny + j + 1, (i + 1) * ny + j + 2, i * ny + j + 2]
                if has_n:
                    lines.append("f " + " ".join("%d//%d" % (k, k) for k in idx))
                else:
                    lines.append("f " + " ".join(str(k) for k in idx))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_obj(path):
    """Returns ``(vertices, normals or None, faces, grid or None)``."""
    verts, normals, faces = [], [], []
    grid = None
    with open(path) as fh:
        for raw in fh:
            parts = raw.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(t) for t in parts[1:4]])
            elif parts[0] == "vn":
                normals.append([float(t) for t in parts[1:4]])
            elif parts[0] == "f":
                faces.append([int(t.split("/")[0]) for t in parts[1:]])
            elif parts[0] == "#" and len(parts) == 8 and parts[1] == "grid":
                v = [float(t) for t in parts[2:6]]
                grid = Grid(v[0], v[1], v[2], v[3], int(parts[6]), int(parts[7]))
    verts = np.array(verts, dtype=float).reshape(-1, 3)
    normals = np.array(normals, dtype=float).reshape(-1, 3) if normals else None
    return verts, normals, faces, grid


def write_fields_csv(path, patch, data):
    g = patch.grid
    X, Y = np.meshgrid(g.xs, g.ys, indexing="ij")
    cols = [X, Y, patch.points[..., 0], patch.points[..., 1], patch.points[..., 2]]
    nrm = patch.normals if patch.normals is not None else np.full(patch.points.shape, np.nan)
    cols += [nrm[..., 0], nrm[..., 1], nrm[..., 2]]
    cols += [data.E, data.F, data.G, data.omega, data.Q, data.R, data.H, data.K]
    flat = [np.asarray(c).ravel() for c in cols]
    mask = patch.failure_mask.ravel()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FIELD_COLUMNS)
        for r in range(mask.size):
            w.writerow([_fmt(c[r]) for c in flat] + [int(mask[r])])


def read_fields_csv(path):
    """Column name -> float array; rejects files with a different header."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != FIELD_COLUMNS:
        raise InvalidArgument("field CSV header must be exactly: " + ",".join(FIELD_COLUMNS))
    body = np.array([[float(t) for t in r] for r in rows[1:] if r], dtype=float)
    if body.size == 0:
        raise InvalidArgument("field CSV has no rows")
    return {name: body[:, k] for k, name in enumerate(FIELD_COLUMNS)}


def grid_from_columns(x, y):
    xs = np.unique(x)
    ys = np.unique(y)
    if xs.size * ys.size != x.size:
        raise InvalidArgument("field rows do not form a full grid")
    return Grid(float(xs[0]), float(xs[-1]), float(ys[0]), float(ys[-1]), xs.size, ys.size)


def save_frame_field(path, field):
    meta = {"grid": field.grid.to_list(), "H": field.H, "name": field.name}
    arrays = {"coeffs": field.coeffs, "failure_mask": field.failure_mask,
              "meta": np.array(json.dumps(meta))}
    if field.alpha_x is not None:
        arrays["alpha_x"] = field.alpha_x
        arrays["alpha_y"] = field.alpha_y
    for k, v in field.diagnostics.items():
        arrays["diag_" + k] = v
    np.savez_compressed(path, **arrays)


def load_frame_field(path):
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        gl = meta["grid"]
        grid = Grid(gl[0], gl[1], gl[2], gl[3], int(gl[4]), int(gl[5]))
        diag = {k[5:]: z[k] for k in z.files if k.startswith("diag_")}
        ax = z["alpha_x"] if "alpha_x" in z.files else None
        ay = z["alpha_y"] if "alpha_y" in z.files else None
        return FrameField(grid, z["coeffs"], z["failure_mask"].astype(bool), diag, ax, ay, meta["H"], meta["name"])


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
