"""Immersions from an extended framing.

With M = Psi(lam0) and D = (lam d/dlam Psi)(lam0) the surface is

    phi = -(1/H) (D M^{-1} + 1/2 M k' M^{-1}),

its unit normal is M k' M^{-1}, and dropping the second term gives the
parallel surface of constant Gaussian curvature.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .loops import DEFAULT_N, evaluate_coeffs, scaled_derivative_coeffs
from .minkowski import K_, TRACE_TOL, inv2, matrix_to_vector
from .pipeline import DEFAULT_SUBSTEPS, Grid, _integrate_axis


@dataclass
class SurfacePatch:
    """Grid of points in Minkowski space; masked points hold NaN."""

    grid: Grid
    points: np.ndarray
    normals: np.ndarray = None
    failure_mask: np.ndarray = None
    lambda0: float = 1.0
    H: float = None
    label: str = ""

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.shape != self.grid.shape + (3,):
            raise InvalidArgument("points must have shape %r" % ((self.grid.shape + (3,)),))
        if self.failure_mask is None:
            self.failure_mask = ~np.all(np.isfinite(self.points), axis=-1)
        self.failure_mask = np.asarray(self.failure_mask, dtype=bool)
        if self.normals is not None:
            self.normals = np.asarray(self.normals, dtype=float)
        self.points = np.where(self.failure_mask[..., None], np.nan, self.points)
        if self.normals is not None:
            self.normals = np.where(self.failure_mask[..., None], np.nan, self.normals)

    def with_points(self, points, normals=None, label=None):
        return SurfacePatch(self.grid, points, normals, self.failure_mask.copy(), self.lambda0, self.H,
                            self.label if label is None else label)


def _check_lambda(lam0):
    if not np.isfinite(lam0) or lam0 <= 0:
        raise InvalidArgument("lambda0 must be a positive real")


def _resolve_H(field, H):
    H = field.H if H is None else H
    if H is None or not np.isfinite(H) or H == 0.0:
        raise InvalidArgument("mean curvature H must be nonzero")
    return float(H)


def _frame_parts(field, lam0):
    M = evaluate_coeffs(field.coeffs, lam0)
    D = evaluate_coeffs(scaled_derivative_coeffs(field.coeffs), lam0)
    Minv = inv2(M)
    return M, D, Minv


def _to_vectors(X, mask):
    X = np.where(mask[..., None, None], 0.0, X)
    v = matrix_to_vector(X, tol=max(TRACE_TOL, 1e-9 * (1.0 + float(np.max(np.abs(X), initial=0.0)))))
    return np.where(mask[..., None], np.nan, v)


def gauss_map(field, lam0=1.0):
    """Unit normal Ad(Psi(lam0)) k' as coordinate vectors."""
    _check_lambda(lam0)
    M, _, Minv = _frame_parts(field, lam0)
    return _to_vectors(M @ K_ @ Minv, field.failure_mask)


def sym_immersion(field, lam0=1.0, H=None):
    _check_lambda(lam0)
    H = _resolve_H(field, H)
    M, D, Minv = _frame_parts(field, lam0)
    NK = M @ K_ @ Minv
    phi = -(D @ Minv + 0.5 * NK) / H
    mask = field.failure_mask
    return SurfacePatch(field.grid, _to_vectors(phi, mask), _to_vectors(NK, mask), mask.copy(),
                        float(lam0), H, "sym")


def parallel_k_surface(field, lam0=1.0, H=None):
    """-(1/H) D M^{-1}: the parallel surface at distance 1/(2H) along N."""
    _check_lambda(lam0)
    H = _resolve_H(field, H)
    M, D, Minv = _frame_parts(field, lam0)
    mask = field.failure_mask
    return SurfacePatch(field.grid, _to_vectors(-(D @ Minv) / H, mask), _to_vectors(M @ K_ @ Minv, mask),
                        mask.copy(), float(lam0), H, "parallel")


def associated_family(field, lambdas, H=None):
    """One Sym immersion per spectral value; the field is evaluated, never rebuilt."""
    lambdas = list(lambdas)
    if not lambdas:
        raise InvalidArgument("need at least one spectral value")
    return [sym_immersion(field, lam, H) for lam in lambdas]


def bscroll_reconstruction(pot, grid, lam0=1.0, substeps=DEFAULT_SUBSTEPS, N=DEFAULT_N):
    """Ruled reconstruction gamma(y) + q(x, y) B(y) of the surface from
    upper-triangular potentials.

    gamma is the Sym curve of the y-axis solution Phi_-, B = Ad(Phi_-) E12 and
    q = (2 lam0 / H) F / (1 + c1 F) with F = (H/2) int_0^x f and c1 the (2,1)
    entry of the lam^-1 coefficient of Phi_-.
    """
    _check_lambda(lam0)
    f = pot.meta.get("f")
    Qf = pot.meta.get("Q")
    if f is None or Qf is None:
        raise InvalidArgument("B-scroll reconstruction needs potentials with known f and Q = 0")
    if np.any(Qf(grid.xs) != 0.0):
        raise InvalidArgument("B-scroll reconstruction needs Q = 0")
    H = float(pot.H)
    ys = grid.ys
    phi_m, _ = _integrate_axis(pot.terms_y, ys, substeps, N)
    M = evaluate_coeffs(phi_m, lam0)
    D = evaluate_coeffs(scaled_derivative_coeffs(phi_m), lam0)
    Minv = inv2(M)
    gamma = matrix_to_vector(-(D @ Minv + 0.5 * M @ K_ @ Minv) / H, tol=1e-8)
    E12 = np.array([[0.0, 1.0], [0.0, 0.0]])
    B = matrix_to_vector(M @ E12 @ Minv, tol=1e-8)
    c1 = phi_m[:, N - 1, 1, 0]
    F = 0.5 * H * f.integral(grid.xs)
    denom = 1.0 + c1[None, :] * F[:, None]
    q = (2.0 * lam0 / H) * F[:, None] / denom
    pts = gamma[None, :, :] + q[..., None] * B[None, :, :]
    mask = ~np.isfinite(pts).all(axis=-1) | (np.abs(denom) < 1e-12)
    return SurfacePatch(grid, pts, None, mask, float(lam0), H, "bscroll_reconstruction")
