"""Finite-difference geometry of surface patches and closed-form oracles.

Derivatives: ``np.gradient`` (second order, one-sided at the edges) for
first derivatives, a three-point stencil for pure second derivatives and a
gradient of a gradient for the mixed one.  Masked points are NaN, so every
stencil touching them yields NaN and drops out of the max-norms, which are
taken over interior points only (two rows in for the curvature equations,
whose mixed derivative acts on the already differenced omega).
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .minkowski import minkowski_dot
from .pipeline import Grid
from .stats import interior_mask, summarize
from .sym import SurfacePatch

CLOSED_FORMS = ("hyperbolic_cylinder", "circular_cylinder", "bscroll_example", "pseudosphere")
EQUATIONS = ("gauss_general", "sinh", "cosh", "liouville")
GATE_TOL = 1e-3


# ---------------------------------------------------------------------------
# difference operators


def d1(f, h, axis):
    return np.gradient(f, h, axis=axis, edge_order=2)


def d2(f, h, axis):
    f = np.moveaxis(np.asarray(f, dtype=float), axis, 0)
    n = f.shape[0]
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / h ** 2
    if n >= 4:
        out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h ** 2
        out[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / h ** 2
    else:
        out[0] = out[1]
        out[-1] = out[-2]
    return np.moveaxis(out, 0, axis)


def dxy(f, hx, hy):
    return d1(d1(f, hx, 0), hy, 1)


# ---------------------------------------------------------------------------
# fundamental data


@dataclass
class FundamentalData:
    grid: Grid
    E: np.ndarray
    F: np.ndarray
    G: np.ndarray
    omega: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    H: np.ndarray
    K: np.ndarray
    mask: np.ndarray

    @property
    def valid(self):
        """Unmasked interior points with a recorded omega."""
        return interior_mask(self.grid.shape) & ~self.mask & np.isfinite(self.omega)

    @property
    def gauss_defect(self):
        return self.H ** 2 - self.K - 4.0 * np.exp(-2.0 * self.omega) * self.Q * self.R

    def summary(self, name):
        return summarize(getattr(self, name) if name != "gauss_defect" else self.gauss_defect,
                         self.grid.xs, self.grid.ys, self.valid)


def fundamental_data(patch):
    """E, F, G, omega, Q, R, H, K by finite differences; N comes from the patch."""
    if patch.normals is None:
        raise InvalidArgument("patch has no normals")
    g = patch.grid
    if g.nx < 3 or g.ny < 3:
        raise InvalidArgument("grid too small for the difference stencils")
    p, Nv = patch.points, patch.normals
    px, py = d1(p, g.hx, 0), d1(p, g.hy, 1)
    pxx, pyy, pxy = d2(p, g.hx, 0), d2(p, g.hy, 1), dxy(p, g.hx, g.hy)
    E = minkowski_dot(px, px)
    F = minkowski_dot(px, py)
    G = minkowski_dot(py, py)
    Q = minkowski_dot(pxx, Nv)
    R = minkowski_dot(pyy, Nv)
    M = minkowski_dot(pxy, Nv)
    with np.errstate(invalid="ignore", divide="ignore"):
        omega = np.log(2.0 * np.where(F > 0, F, np.nan))
        H = 2.0 * np.exp(-omega) * M
        K = (Q * R - M ** 2) / (E * G - F ** 2)
    return FundamentalData(g, E, F, G, omega, Q, R, H, K, patch.failure_mask.copy())


# ---------------------------------------------------------------------------
# residuals


@dataclass
class PDEResidual:
    equation: str
    max: float
    mean: float
    argmax: list
    applicable: bool
    Q: float
    R: float
    gate: float

    def to_dict(self):
        return {"equation": self.equation, "max": self.max, "mean": self.mean, "argmax": self.argmax,
                "applicable": self.applicable, "Q": self.Q, "R": self.R, "gate": self.gate}


def _gate(data, equation, valid):
    Q, R, H = data.Q[valid], data.R[valid], data.H[valid]
    if equation == "gauss_general":
        return 0.0
    if equation == "sinh":
        return float(max(np.max(np.abs(Q - R)), np.max(np.abs(np.abs(Q) - 0.5 * np.abs(H)))))
    if equation == "cosh":
        return float(max(np.max(np.abs(Q + R)), np.max(np.abs(np.abs(Q) - 0.5 * np.abs(H)))))
    # Liouville: one Hopf differential vanishes, the other has the normal-form size
    small = np.minimum(np.abs(Q), np.abs(R))
    big = np.maximum(np.abs(Q), np.abs(R))
    return float(max(np.max(small), np.max(np.abs(big - 0.5 * np.abs(H)))))


def pde_residual(data, equation, gate_tol=GATE_TOL):
    """Max-norm of the chosen curvature equation over unmasked interior points.

    sinh / cosh / liouville are flagged not applicable unless the measured Q
    and R are in the corresponding normal form within ``gate_tol``; the
    residual itself is always reported.
    """
    if equation not in EQUATIONS:
        raise InvalidArgument("equation must be one of %s" % (EQUATIONS,))
    g = data.grid
    w = data.omega
    H = data.H
    wxy = dxy(w, g.hx, g.hy)
    if equation == "gauss_general":
        res = wxy + 0.5 * H ** 2 * np.exp(w) - 2.0 * data.Q * data.R * np.exp(-w)
    elif equation == "sinh":
        res = wxy + H ** 2 * np.sinh(w)
    elif equation == "cosh":
        res = wxy + H ** 2 * np.cosh(w)
    else:
        res = wxy + 0.5 * H ** 2 * np.exp(w)
    # omega is itself differenced, so its one-sided edge values would leak an
    # O(h) error into the next row; keep the stencil off the edge entirely
    valid = data.valid & interior_mask(g.shape, margin=2)
    s = summarize(res, g.xs, g.ys, valid)
    if s["count"] == 0:
        raise InvalidArgument("no interior points to evaluate")
    gate = _gate(data, equation, valid)
    return PDEResidual(equation, s["max"], s["mean"], s["argmax"], bool(gate <= gate_tol),
                       float(np.mean(data.Q[valid])), float(np.mean(data.R[valid])), gate)


def harmonic_residual(normals, grid):
    """Defect of psi_xy being parallel to psi, best-fit rho per point."""
    psi = np.asarray(normals, dtype=float)
    pxy = dxy(psi, grid.hx, grid.hy)
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = np.sum(pxy * psi, axis=-1) / np.sum(psi * psi, axis=-1)
        defect = np.linalg.norm(pxy - rho[..., None] * psi, axis=-1) / (np.linalg.norm(pxy, axis=-1) + 1.0)
    valid = interior_mask(grid.shape) & np.isfinite(defect)
    return float(np.max(defect[valid], initial=0.0))


def tangency_residual(patch):
    """max |<phi_x, N>|, |<phi_y, N>| over unmasked interior points."""
    g = patch.grid
    px, py = d1(patch.points, g.hx, 0), d1(patch.points, g.hy, 1)
    r = np.maximum(np.abs(minkowski_dot(px, patch.normals)), np.abs(minkowski_dot(py, patch.normals)))
    return summarize(r, g.xs, g.ys, interior_mask(g.shape) & ~patch.failure_mask)


def normal_norm_defect(patch):
    n = patch.normals
    d = np.abs(minkowski_dot(n, n) - 1.0)
    return float(np.max(d[~patch.failure_mask], initial=0.0))


def family_spread(patches):
    """Pointwise spread of e^omega and H across an associated family."""
    datas = [fundamental_data(p) for p in patches]
    valid = np.logical_and.reduce([d.valid for d in datas])
    ew = np.stack([np.exp(d.omega) for d in datas])
    Hs = np.stack([d.H for d in datas])
    ew_spread = np.max(ew, axis=0) - np.min(ew, axis=0)
    H_spread = np.max(Hs, axis=0) - np.min(Hs, axis=0)
    g = patches[0].grid
    return {"exp_omega": summarize(ew_spread, g.xs, g.ys, valid), "H": summarize(H_spread, g.xs, g.ys, valid)}


# ---------------------------------------------------------------------------
# alignment


def _origin_frame(patch):
    g = patch.grid
    i, j = g.i0, g.j0
    if patch.failure_mask[i, j]:
        raise InvalidArgument("origin is masked")
    px = d1(patch.points, g.hx, 0)[i, j]
    py = d1(patch.points, g.hy, 1)[i, j]
    if patch.normals is not None:
        n = patch.normals[i, j]
    else:
        # Lorentz cross product gives a vector orthogonal to both
        e = np.cross(px, py)
        n = np.array([-e[0], e[1], e[2]])
        nn = minkowski_dot(n, n)
        if not nn > 0:
            raise InvalidArgument("degenerate frame at origin")
        n = n / np.sqrt(nn)
    Fm = np.column_stack([px, py, n])
    if not np.all(np.isfinite(Fm)) or abs(np.linalg.det(Fm)) < 1e-12 * max(1.0, np.abs(Fm).max()) ** 3:
        raise InvalidArgument("degenerate frame at origin")
    return patch.points[i, j], Fm


def align_to(a, b, flip=False):
    """Points of ``a`` moved by the affine map matching its origin 1-jet to b's."""
    pa, Fa = _origin_frame(a)
    pb, Fb = _origin_frame(b)
    if flip:
        Fb = Fb * np.array([1.0, 1.0, -1.0])
    A = Fb @ np.linalg.inv(Fa)
    return (a.points - pa) @ A.T + pb


def compare_aligned(a, b, allow_normal_flip=True):
    """Max coordinate distance after moving ``a`` onto ``b`` at the origin."""
    if a.grid != b.grid:
        raise InvalidArgument("patches must share a grid")
    live = ~(a.failure_mask | b.failure_mask)
    best = np.inf
    for flip in ((False, True) if allow_normal_flip else (False,)):
        moved = align_to(a, b, flip)
        d = np.max(np.abs(moved - b.points)[live], initial=0.0)
        best = min(best, float(d))
    return best


# ---------------------------------------------------------------------------
# closed forms


def closed_form_surface(name, grid, H=0.5):
    """Exact surfaces with analytic normals.

    ``pseudosphere`` is the sphere of radius 1/H written in the null chart
    produced by normalized potentials with Q = R = 0, f = g = 1.
    ``bscroll_example`` is evaluated in its (s, t) coordinates.
    """
    x, y = np.meshgrid(grid.xs, grid.ys, indexing="ij")
    if name == "hyperbolic_cylinder":
        u = 0.5 * (x - y)
        pts = np.stack([np.sinh(u), 0.5 * (x + y), np.cosh(u)], axis=-1)
        nrm = -np.stack([np.sinh(u), np.zeros_like(u), np.cosh(u)], axis=-1)
        H = 0.5
    elif name == "circular_cylinder":
        v = 0.5 * (x + y)
        pts = np.stack([0.5 * (x - y), np.sin(v), -np.cos(v)], axis=-1)
        nrm = np.stack([np.zeros_like(v), -np.sin(v), np.cos(v)], axis=-1)
        H = 0.5
    elif name == "pseudosphere":
        t1 = 2.0 * np.arctan(0.5 * H * x)
        t2 = 2.0 * np.arctan(0.5 * H * y)
        s, d = 0.5 * (t1 + t2), 0.5 * (t1 - t2)
        pts = np.stack([-np.sin(d), np.cos(s), np.sin(s)], axis=-1) / (H * np.cos(d))[..., None]
        nrm = -H * pts
    elif name == "bscroll_example":
        s, t = x, y
        c, sh = np.cosh(2 * s), np.sinh(2 * s)
        pts = np.stack([0.5 * (sh - t * c), 0.5 * (c - t * sh), s + 0.5 * t], axis=-1)
        C = np.stack([-sh, -c, np.zeros_like(s)], axis=-1)
        B = 0.5 * np.stack([-c, -sh, np.ones_like(s)], axis=-1)
        nrm = C - t[..., None] * B
        H = 1.0
    else:
        raise InvalidArgument("unknown closed form %r; valid names: %s" % (name, ", ".join(CLOSED_FORMS)))
    return SurfacePatch(grid, pts, nrm, np.zeros(grid.shape, dtype=bool), 1.0, H, "closed:" + name)


def ruledness_check(patch, fixed_axis):
    """Largest distance from the best-fit line along coordinate lines.

    ``fixed_axis`` names the coordinate held constant on each line.
    """
    if fixed_axis not in ("x", "y"):
        raise InvalidArgument("fixed_axis must be 'x' or 'y'")
    pts = patch.points if fixed_axis == "x" else np.swapaxes(patch.points, 0, 1)
    mask = patch.failure_mask if fixed_axis == "x" else patch.failure_mask.T
    worst = 0.0
    for line, m in zip(pts, mask):
        p = line[~m]
        if len(p) < 3:
            continue
        c = p - p.mean(axis=0)
        _, _, vt = np.linalg.svd(c, full_matrices=False)
        off = c - np.outer(c @ vt[0], vt[0])
        worst = max(worst, float(np.max(np.linalg.norm(off, axis=1))))
    return worst


# ---------------------------------------------------------------------------
# null Frenet curves


@dataclass
class BScrollSpec:
    """Null Frenet data: curvature kappa(s), constant torsion tau, frame seed at s = 0."""

    kappa: object
    tau: float
    A0: np.ndarray
    B0: np.ndarray
    C0: np.ndarray

    def __post_init__(self):
        self.A0, self.B0, self.C0 = (np.asarray(v, dtype=float) for v in (self.A0, self.B0, self.C0))
        defect = frame_relations_defect(self.A0, self.B0, self.C0)
        if defect > 1e-10:
            raise InvalidArgument("frame seed violates the null frame relations (defect %.3g)" % defect)
        if not callable(self.kappa):
            k = float(self.kappa)
            self.kappa = lambda s, k=k: k + 0.0 * np.asarray(s, dtype=float)

    @classmethod
    def example(cls):
        """The constant-torsion example with A(s) = (cosh 2s, sinh 2s, 1)."""
        return cls(-2.0, 1.0, [1.0, 0.0, 1.0], [-0.5, 0.0, 0.5], [0.0, -1.0, 0.0])


def frame_relations_defect(A, B, C):
    ip = minkowski_dot
    rel = [ip(A, B) - 1.0, ip(A, A), ip(B, B), ip(C, C) - 1.0, ip(A, C), ip(B, C)]
    return float(np.max(np.abs(rel)))


def null_frenet_frame(curve, s_samples, substeps=16):
    """RK4 for A' = kappa C, B' = tau C, C' = -tau A - kappa B from s = 0."""
    s = np.asarray(s_samples, dtype=float)
    order = np.argsort(s)
    out = np.zeros((s.size, 3, 3))

    def rhs(t, Y):
        A, B, C = Y
        k = float(curve.kappa(t))
        return np.array([k * C, curve.tau * C, -curve.tau * A - k * B])

    def march(idx):
        Y = np.array([curve.A0, curve.B0, curve.C0])
        prev = 0.0
        for i in idx:
            h = (s[i] - prev) / substeps
            t = prev
            for _ in range(substeps):
                k1 = rhs(t, Y)
                k2 = rhs(t + 0.5 * h, Y + 0.5 * h * k1)
                k3 = rhs(t + 0.5 * h, Y + 0.5 * h * k2)
                k4 = rhs(t + h, Y + h * k3)
                Y = Y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
                t += h
            out[i] = Y
            prev = s[i]

    march([i for i in order if s[i] >= 0])
    march([i for i in order[::-1] if s[i] < 0])
    return out[:, 0], out[:, 1], out[:, 2]
