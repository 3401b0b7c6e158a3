"""From potentials to the extended framing and back.

``build_extended_framing`` integrates the two axis ODEs, then splits each
grid point independently.  Besides the frames it stores the exact
Maurer-Cartan coefficients that fall out of the split:

    alpha_x = [L_-^{-1} xi_x L_-]_{>=0},   alpha_y = [ell_+ xi_y ell_+^{-1}]_{<0},

where ``psi_x^{-1} psi_y = L_- ell_+``.  ``maurer_cartan_form`` instead
measures the form by finite differences, as an independent check.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import EmptyResultError, ExtractionFailed, InvalidArgument, TruncationOverflow
from .factorization import RCOND_THRESHOLD, birkhoff_minus_plus_coeffs, iwasawa_coeffs
from .loops import (
    DEFAULT_N,
    TAIL_BUDGET,
    TruncatedLoop,
    evaluate_coeffs,
    exponents,
    flip_coeffs,
    identity_coeffs,
    invert_coeffs,
    invert_one_sided_plus,
    mul_coeffs,
    norm_coeffs,
    project_coeffs,
    twist_defect,
)
from .potentials import tabulated_potentials
from .stats import interior_mask, summarize

DEFAULT_SUBSTEPS = 16
DEPENDENCE_TOL = 1e-6


@dataclass(frozen=True)
class Grid:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int
    ny: int

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny or self.nx < 3 or self.ny < 3:
            raise InvalidArgument("grid needs at least 3 points per axis")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise InvalidArgument("grid bounds must be increasing")
        self._origin_index(self.x_min, self.x_max, self.nx, "x")
        self._origin_index(self.y_min, self.y_max, self.ny, "y")

    @staticmethod
    def _axis(lo, hi, n):
        t = np.linspace(lo, hi, int(n))
        tol = 1e-9 * (hi - lo)
        t[np.abs(t) < tol] = 0.0
        return t

    @classmethod
    def _origin_index(cls, lo, hi, n, label):
        t = cls._axis(lo, hi, n)
        hit = np.nonzero(t == 0.0)[0]
        if len(hit) != 1:
            raise InvalidArgument("origin is not a grid point along %s" % label)
        return int(hit[0])

    @classmethod
    def square(cls, half_width, n):
        return cls(-half_width, half_width, -half_width, half_width, n, n)

    @property
    def xs(self):
        return self._axis(self.x_min, self.x_max, self.nx)

    @property
    def ys(self):
        return self._axis(self.y_min, self.y_max, self.ny)

    @property
    def hx(self):
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def hy(self):
        return (self.y_max - self.y_min) / (self.ny - 1)

    @property
    def i0(self):
        return self._origin_index(self.x_min, self.x_max, self.nx, "x")

    @property
    def j0(self):
        return self._origin_index(self.y_min, self.y_max, self.ny, "y")

    @property
    def shape(self):
        return (self.nx, self.ny)

    def refined(self):
        """Same box with spacing halved."""
        return Grid(self.x_min, self.x_max, self.y_min, self.y_max, 2 * self.nx - 1, 2 * self.ny - 1)

    def to_list(self):
        return [self.x_min, self.x_max, self.y_min, self.y_max, self.nx, self.ny]


@dataclass
class FrameField:
    """Extended framing on a grid.

    ``coeffs`` has shape ``(nx, ny, 2N+1, 2, 2)``; masked points hold NaN.
    ``alpha_x`` / ``alpha_y`` are the exact Maurer-Cartan coefficients (may
    be None for fields read from elsewhere).
    """

    grid: Grid
    coeffs: np.ndarray
    failure_mask: np.ndarray
    diagnostics: dict = dc_field(default_factory=dict)
    alpha_x: np.ndarray = None
    alpha_y: np.ndarray = None
    H: float = None
    name: str = "custom"

    @property
    def N(self):
        return (self.coeffs.shape[-3] - 1) // 2

    def frame(self, i, j):
        return TruncatedLoop(self.coeffs[i, j], twisted=True)

    @property
    def frames(self):
        out = np.empty(self.grid.shape, dtype=object)
        for i in range(self.grid.nx):
            for j in range(self.grid.ny):
                out[i, j] = None if self.failure_mask[i, j] else self.frame(i, j)
        return out

    def evaluate(self, lam0):
        return evaluate_coeffs(self.coeffs, lam0)

    @property
    def failure_fraction(self):
        return float(self.failure_mask.mean())


# ---------------------------------------------------------------------------
# axis integration


def _dense_terms(terms, N, shape):
    out = np.zeros(shape + (2 * N + 1, 2, 2))
    for k, arr in terms.items():
        if abs(k) > N:
            if np.any(arr != 0.0):
                raise TruncationOverflow("potential exponent %d exceeds truncation N=%d" % (k, N))
            continue
        out[..., k + N, :, :] = arr
    return out


def _integrate_axis(terms_fn, samples, substeps, N):
    """RK4 for d psi/dt = psi xi(t), psi(0) = 1, outward from t = 0.

    Returns ``(coeffs (m, 2N+1, 2, 2), tail (m,))``.
    """
    t = np.asarray(samples, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise InvalidArgument("samples must be a non-empty 1-d sequence")
    if np.any(np.diff(t) <= 0):
        raise InvalidArgument("samples must be strictly increasing")
    hit = np.nonzero(t == 0.0)[0]
    if len(hit) != 1:
        raise InvalidArgument("samples must contain 0 as the anchor")
    if int(substeps) < 1:
        raise InvalidArgument("substeps must be a positive integer")
    substeps = int(substeps)
    i0 = int(hit[0])
    m = t.size
    out = np.zeros((m, 2 * N + 1, 2, 2))
    tails = np.zeros(m)
    out[i0] = identity_coeffs(N)

    def sweep(indices):
        psi = identity_coeffs(N)
        tail = 0.0
        prev = 0.0
        for i in indices:
            h = (t[i] - prev) / substeps
            nodes = prev + h * np.arange(substeps + 1)
            mids = nodes[:-1] + 0.5 * h
            xi_n = _dense_terms(terms_fn(nodes), N, (substeps + 1,))
            xi_m = _dense_terms(terms_fn(mids), N, (substeps,))
            for s in range(substeps):
                k1, e1 = mul_coeffs(psi, xi_n[s])
                k2, e2 = mul_coeffs(psi + 0.5 * h * k1, xi_m[s])
                k3, e3 = mul_coeffs(psi + 0.5 * h * k2, xi_m[s])
                k4, e4 = mul_coeffs(psi + h * k3, xi_n[s + 1])
                psi = psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                tail += abs(h) / 6.0 * (e1 + 2.0 * e2 + 2.0 * e3 + e4)
            if tail > TAIL_BUDGET:
                raise TruncationOverflow(
                    "truncation tail %.3g exceeds %.0e at t=%g; increase N (now %d)" % (tail, TAIL_BUDGET, t[i], N))
            out[i] = psi
            tails[i] = tail
            prev = t[i]

    sweep(range(i0 + 1, m))
    sweep(range(i0 - 1, -1, -1))
    return out, tails


def integrate_framing_axis(pot, axis, samples, substeps=DEFAULT_SUBSTEPS, N=DEFAULT_N):
    """Solve the axis ODE with RK4; returns a list of TruncatedLoop."""
    if axis not in ("x", "y"):
        raise InvalidArgument("axis must be 'x' or 'y'")
    terms = pot.terms_x if axis == "x" else pot.terms_y
    coeffs, tails = _integrate_axis(terms, samples, substeps, N)
    return [TruncatedLoop(c, twisted=True, tail_loss=float(e)) for c, e in zip(coeffs, tails)]


def loop_exponential(generator, t=1.0):
    """exp(t * generator) by scaling and squaring with a Taylor core."""
    A = np.asarray(generator.coeffs, dtype=float) * float(t)
    N = generator.N
    nrm = float(norm_coeffs(A))
    s = 0 if nrm <= 0.25 else int(np.ceil(np.log2(nrm / 0.25)))
    B = A / 2.0 ** s
    result = identity_coeffs(N)
    term = identity_coeffs(N)
    tail = 0.0
    for k in range(1, 40):
        term, e = mul_coeffs(term, B)
        term = term / k
        tail += float(e) / k
        result = result + term
        if norm_coeffs(term) < 1e-18:
            break
    for _ in range(s):
        result, e = mul_coeffs(result, result)
        tail = 2.0 * tail + float(e)
    if tail > TAIL_BUDGET:
        raise TruncationOverflow("exponential tail %.3g exceeds budget; increase N (now %d)" % (tail, N))
    return TruncatedLoop(result, twisted=generator.twisted, tail_loss=tail)


# ---------------------------------------------------------------------------
# the representation


def sl2_inverse_coeffs(c):
    """Adjugate; the inverse of a loop with determinant identically 1."""
    out = np.empty_like(c)
    out[..., 0, 0] = c[..., 1, 1]
    out[..., 1, 1] = c[..., 0, 0]
    out[..., 0, 1] = -c[..., 0, 1]
    out[..., 1, 0] = -c[..., 1, 0]
    return out


def _invert_minus(c):
    return flip_coeffs(invert_one_sided_plus(flip_coeffs(c)))


def build_extended_framing(pot, grid, substeps=DEFAULT_SUBSTEPS, N=DEFAULT_N, threshold=RCOND_THRESHOLD):
    """Extended framing on ``grid`` from the potential pair ``pot``."""
    xs, ys = grid.xs, grid.ys
    nx, ny = grid.shape
    psi1, tail1 = _integrate_axis(pot.terms_x, xs, substeps, N)
    psi2, tail2 = _integrate_axis(pot.terms_y, ys, substeps, N)
    psi1_inv = invert_coeffs(psi1)
    xi_x = _dense_terms(pot.terms_x(xs), N, (nx,))
    xi_y = _dense_terms(pot.terms_y(ys), N, (ny,))

    M = 2 * N + 1
    coeffs = np.full((nx, ny, M, 2, 2), np.nan)
    alpha_x = np.full_like(coeffs, np.nan)
    alpha_y = np.full_like(coeffs, np.nan)
    rcond = np.zeros((nx, ny))
    consistency = np.full((nx, ny), np.nan)
    tail = np.zeros((nx, ny))
    ok_all = np.zeros((nx, ny), dtype=bool)

    for j in range(ny):
        out = iwasawa_coeffs(psi1, psi1_inv, psi2[j], threshold)
        ok = out["ok"]
        ok_all[:, j] = ok
        rcond[:, j] = out["rcond"]
        tail[:, j] = tail1 + tail2[j] + out["tail"]
        if not np.any(ok):
            continue
        sel = np.nonzero(ok)[0]
        psi = out["psi"][sel]
        l_minus = out["l_minus"][sel]
        m = out["l_plus"][sel]
        ell = out["ell_plus"][sel]
        coeffs[sel, j] = psi
        back, _ = mul_coeffs(psi2[j], m)
        consistency[sel, j] = norm_coeffs(psi - back)
        a, _ = mul_coeffs(_invert_minus(l_minus), xi_x[sel])
        a, _ = mul_coeffs(a, l_minus)
        alpha_x[sel, j] = project_coeffs(a, "plus")
        b, _ = mul_coeffs(ell, xi_y[j])
        b, _ = mul_coeffs(b, m)
        alpha_y[sel, j] = project_coeffs(b, "minus_star")

    i0, j0 = grid.i0, grid.j0
    coeffs[i0, j0] = identity_coeffs(N)
    mask = ~ok_all
    mask[i0, j0] = False
    if mask.sum() == mask.size - 1:
        # only the trivially split origin survived
        raise EmptyResultError("every grid point off the origin failed the big-cell test")
    worst = float(np.max(tail[~mask]))
    if worst > TAIL_BUDGET:
        raise TruncationOverflow("cumulative truncation tail %.3g exceeds %.0e; increase N (now %d)"
                                 % (worst, TAIL_BUDGET, N))
    det_defect = np.zeros((nx, ny))
    for lam0 in (0.5, 1.0, 2.0):
        Mv = evaluate_coeffs(coeffs, lam0)
        det = Mv[..., 0, 0] * Mv[..., 1, 1] - Mv[..., 0, 1] * Mv[..., 1, 0]
        det_defect = np.maximum(det_defect, np.abs(det - 1.0))
    twist = np.array([[twist_defect(coeffs[i, j]) if not mask[i, j] else np.nan for j in range(ny)]
                      for i in range(nx)])
    diagnostics = {
        "rcond": rcond,
        "consistency": consistency,
        "tail": tail,
        "det_defect": np.where(mask, np.nan, det_defect),
        "twist_defect": twist,
    }
    return FrameField(grid, coeffs, mask, diagnostics, alpha_x, alpha_y, pot.H, pot.name)


# ---------------------------------------------------------------------------
# checks on the framing


@dataclass
class MaurerCartanReport:
    alpha_x: np.ndarray
    alpha_y: np.ndarray
    structure: np.ndarray
    flatness: np.ndarray
    admissibility: np.ndarray
    k_part_x: np.ndarray
    m_part_x: np.ndarray
    k_part_y: np.ndarray
    m_part_y: np.ndarray
    valid: np.ndarray
    summary: dict
    skipped: int


def _commutator_coeffs(a, b):
    ab, _ = mul_coeffs(a, b)
    ba, _ = mul_coeffs(b, a)
    return ab - ba


def maurer_cartan_form(field):
    """Finite-difference Maurer-Cartan form and its residuals.

    Residual maxima are taken over unmasked interior points whose stencils
    avoid masked points (NaN propagation does the skipping).
    """
    g = field.grid
    N = field.N
    k = exponents(N)
    c = field.coeffs
    inv = sl2_inverse_coeffs(c)
    dx = np.gradient(c, g.hx, axis=0, edge_order=2)
    dy = np.gradient(c, g.hy, axis=1, edge_order=2)
    ax, _ = mul_coeffs(inv, dx)
    ay, _ = mul_coeffs(inv, dy)
    off_x = ~np.isin(k, (0, 1))
    off_y = ~np.isin(k, (-1, 0))
    structure = norm_coeffs(ax[..., off_x, :, :]) + norm_coeffs(ay[..., off_y, :, :])
    d_ay_dx = np.gradient(ay, g.hx, axis=0, edge_order=2)
    d_ax_dy = np.gradient(ax, g.hy, axis=1, edge_order=2)
    flat = norm_coeffs(d_ay_dx - d_ax_dy + _commutator_coeffs(ax, ay))

    a0x, a1x = ax[..., N, :, :], ax[..., N + 1, :, :]
    a0y, a1y = ay[..., N, :, :], ay[..., N - 1, :, :]
    adm = (-np.gradient(a1y, g.hx, axis=0, edge_order=2) - np.gradient(a1x, g.hy, axis=1, edge_order=2)
           - (a0x @ a1y - a1y @ a0x) - (a0y @ a1x - a1x @ a0y))
    adm = np.abs(adm).sum(axis=-2).max(axis=-1)

    valid = interior_mask(g.shape) & ~field.failure_mask
    skipped = int(np.sum(valid & ~(np.isfinite(structure) & np.isfinite(flat) & np.isfinite(adm))))
    xs, ys = g.xs, g.ys
    summary = {
        "structure": summarize(structure, xs, ys, valid),
        "flatness": summarize(flat, xs, ys, valid),
        "admissibility": summarize(adm, xs, ys, valid),
    }
    return MaurerCartanReport(
        alpha_x=ax, alpha_y=ay, structure=structure, flatness=flat, admissibility=adm,
        k_part_x=project_coeffs(ax, "k_part"), m_part_x=project_coeffs(ax, "m_part"),
        k_part_y=project_coeffs(ay, "k_part"), m_part_y=project_coeffs(ay, "m_part"),
        valid=valid, summary=summary, skipped=skipped)


CLASS_LABELS = {1: "H+", -1: "H-", 0: "H0"}


@dataclass
class ConnectionClass:
    S: np.ndarray
    labels: np.ndarray
    dominant: str
    counts: dict


def _alpha_pair(field):
    if field.alpha_x is not None and field.alpha_y is not None:
        return field.alpha_x, field.alpha_y
    rep = maurer_cartan_form(field)
    return rep.alpha_x, rep.alpha_y


def classify_connection(field, tol=1e-9):
    """Sign of <a'_m, a'_m> <a''_m, a''_m> at lambda = 1, per point."""
    ax, ay = _alpha_pair(field)
    N = field.N
    mx = ax[..., N + 1, :, :]
    my = ay[..., N - 1, :, :]
    # <X, X> = 1/2 tr(X^2) = -det X for trace-free X
    qx = mx[..., 0, 1] * mx[..., 1, 0]
    qy = my[..., 0, 1] * my[..., 1, 0]
    S = qx * qy
    sign = np.where(np.abs(S) <= tol, 0, np.sign(np.nan_to_num(S))).astype(int)
    labels = np.full(field.grid.shape, "", dtype=object)
    counts = {}
    for s, lab in CLASS_LABELS.items():
        hit = (sign == s) & ~field.failure_mask & np.isfinite(S)
        labels[hit] = lab
        counts[lab] = int(hit.sum())
    dominant = max(counts, key=counts.get) if any(counts.values()) else ""
    return ConnectionClass(S, labels, dominant, counts)


def _split_all(c, convention):
    """Batched Birkhoff split; returns (normalized, complement, ok)."""
    if convention == "plus_minus":
        gm, ell, _, _, ok = birkhoff_minus_plus_coeffs(flip_coeffs(c))
        return flip_coeffs(gm), flip_coeffs(ell), ok
    gm, ell, _, _, ok = birkhoff_minus_plus_coeffs(c)
    return gm, ell, ok


def extract_normalized_potentials(field, check_dependence=True):
    """Recover the normalized potentials of a framing.

    Along y = 0 split Psi = Psi_+ L_-; then Psi_+^{-1} d Psi_+ is lam times
    the conjugate of the lam^1 part of alpha_x by the constant term of L_-.
    Along x = 0 the same with Psi = Psi_- L_+ and the lam^-1 part of alpha_y.
    The returned pair carries a ``diagnostics`` entry in ``meta``.
    """
    g = field.grid
    N = field.N
    i0, j0 = g.i0, g.j0
    xs, ys = g.xs, g.ys
    if np.any(field.failure_mask[:, j0]):
        i = int(np.nonzero(field.failure_mask[:, j0])[0][0])
        raise ExtractionFailed("x-axis point is masked", location=(float(xs[i]), 0.0))
    if np.any(field.failure_mask[i0, :]):
        j = int(np.nonzero(field.failure_mask[i0, :])[0][0])
        raise ExtractionFailed("y-axis point is masked", location=(0.0, float(ys[j])))
    ax, ay = _alpha_pair(field)

    psi_plus_axis, l_minus, ok = _split_all(field.coeffs[:, j0], "plus_minus")
    if not np.all(ok):
        i = int(np.nonzero(~ok)[0][0])
        raise ExtractionFailed("off the big cell on the x-axis", location=(float(xs[i]), 0.0))
    L0 = l_minus[:, N]
    eta1 = L0 @ ax[:, j0, N + 1] @ np.linalg.inv(L0)

    psi_minus_axis, l_plus, ok = _split_all(field.coeffs[i0, :], "minus_plus")
    if not np.all(ok):
        j = int(np.nonzero(~ok)[0][0])
        raise ExtractionFailed("off the big cell on the y-axis", location=(0.0, float(ys[j])))
    P0 = l_plus[:, N]
    eta2 = P0 @ ay[i0, :, N - 1] @ np.linalg.inv(P0)

    diag = {}
    if check_dependence:
        dep_x = np.full(g.shape, np.nan)
        dep_y = np.full(g.shape, np.nan)
        for j in range(g.ny):
            live = ~field.failure_mask[:, j]
            if not np.any(live):
                continue
            c = field.coeffs[live, j]
            pp, _, okp = _split_all(c, "plus_minus")
            dep_x[live, j] = np.where(okp, norm_coeffs(pp - psi_plus_axis[live]), np.inf)
            mm, _, okm = _split_all(c, "minus_plus")
            dep_y[live, j] = np.where(okm, norm_coeffs(mm - psi_minus_axis[j]), np.inf)
        diag["x_dependence"] = summarize(dep_x, xs, ys)
        diag["y_dependence"] = summarize(dep_y, xs, ys)
        diag["within_tolerance"] = bool(max(diag["x_dependence"]["max"], diag["y_dependence"]["max"])
                                        <= DEPENDENCE_TOL)

    pot = tabulated_potentials(field.H, xs, {1: eta1}, ys, {-1: eta2}, name="extracted:" + str(field.name))
    pot.meta["diagnostics"] = diag
    return pot
