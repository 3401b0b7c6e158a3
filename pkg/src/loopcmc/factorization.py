"""Birkhoff factorization on the big cell and the pairwise Iwasawa split.

For ``gamma = gamma_minus * ell_plus`` (``gamma_minus = 1 + O(1/lam)``,
``ell_plus`` holomorphic at 0) the unknown is ``m = ell_plus^{-1}``.  It is
fixed by requiring ``gamma * m`` to have no positive powers and constant
term 1, a square block-Toeplitz system with blocks ``gamma_{k-j}``,
``0 <= k, j <= N``.  Left multiplication acts column by column, so both
columns of ``m`` share one ``2(N+1)`` system.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BigCellFailure, InvalidArgument
from .loops import (
    TruncatedLoop,
    flip_coeffs,
    identity_coeffs,
    invert_one_sided_plus,
    loop_invert,
    mul_coeffs,
    norm_coeffs,
    order_of,
    project_coeffs,
)

RCOND_THRESHOLD = 1e-10
CONVENTIONS = ("minus_plus", "plus_minus")


def toeplitz_system(g):
    """Block-Toeplitz matrix ``T[k, j] = g_{k-j}`` for ``0 <= k, j <= N``."""
    g = np.asarray(g, dtype=float)
    N = order_of(g)
    kk = np.arange(N + 1)
    idx = kk[:, None] - kk[None, :] + N
    blocks = g[..., idx, :, :]  # (..., N+1, N+1, 2, 2)
    return np.swapaxes(blocks, -3, -2).reshape(g.shape[:-3] + (2 * N + 2, 2 * N + 2))


def rcond_of(T):
    s = np.linalg.svd(T, compute_uv=False)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(s[..., 0] > 0, s[..., -1] / s[..., 0], 0.0)
    return r


def birkhoff_minus_plus_coeffs(g, threshold=RCOND_THRESHOLD):
    """Batched ``g = g_minus * ell_plus``.

    Returns ``(g_minus, ell_plus, m, rcond, ok)`` with ``m = ell_plus^{-1}``.
    Entries where ``ok`` is False hold NaN.
    """
    g = np.asarray(g, dtype=float)
    N = order_of(g)
    batch = g.shape[:-3]
    T = toeplitz_system(g)
    rcond = rcond_of(T)
    ok = np.isfinite(rcond) & (rcond >= threshold)
    T = np.where(ok[..., None, None], T, np.eye(2 * N + 2))
    rhs = np.zeros(batch + (2 * N + 2, 2))
    rhs[..., 0:2, :] = np.eye(2)
    sol = np.linalg.solve(T, rhs).reshape(batch + (N + 1, 2, 2))
    m = np.zeros(batch + (2 * N + 1, 2, 2))
    m[..., N:, :, :] = sol
    gm, _ = mul_coeffs(g, m)
    g_minus = project_coeffs(gm, "minus_star") + identity_coeffs(N)
    ell_plus = invert_one_sided_plus(np.where(ok[..., None, None, None], m, identity_coeffs(N)))
    bad = ~ok[..., None, None, None]
    g_minus = np.where(bad, np.nan, g_minus)
    ell_plus = np.where(bad, np.nan, ell_plus)
    m = np.where(bad, np.nan, m)
    return g_minus, ell_plus, m, rcond, ok


@dataclass(frozen=True)
class BirkhoffResult:
    normalized_factor: TruncatedLoop
    complement_factor: TruncatedLoop
    residual: float
    condition_estimate: float
    convention: str = "minus_plus"


def big_cell_diagnostic(gamma):
    """Reciprocal condition estimate of the Birkhoff system, in [0, 1]."""
    return float(rcond_of(toeplitz_system(gamma.coeffs)))


def birkhoff_split(gamma, convention="minus_plus", threshold=RCOND_THRESHOLD):
    """Factor ``gamma`` as ``gamma_- * ell_+`` or ``gamma_+ * ell_-``.

    The normalized factor has constant term 1 and support strictly on one
    side; the complement lives on the closed other side.
    """
    if convention not in CONVENTIONS:
        raise InvalidArgument("convention must be one of %s" % (CONVENTIONS,))
    c = gamma.coeffs
    if convention == "plus_minus":
        c = flip_coeffs(c)
    g_minus, ell_plus, _, rcond, ok = birkhoff_minus_plus_coeffs(c, threshold)
    if not ok:
        raise BigCellFailure(
            "loop is off the big cell at N=%d (rcond %.3g < %.1g)" % (gamma.N, rcond, threshold),
            rcond=float(rcond))
    if convention == "plus_minus":
        g_minus, ell_plus = flip_coeffs(g_minus), flip_coeffs(ell_plus)
    prod, tail = mul_coeffs(g_minus, ell_plus)
    residual = float(norm_coeffs(prod - gamma.coeffs))
    normalized = TruncatedLoop(g_minus, gamma.twisted, gamma.tail_loss)
    complement = TruncatedLoop(ell_plus, gamma.twisted, gamma.tail_loss + float(tail))
    return BirkhoffResult(normalized, complement, residual, float(rcond), convention)


def iwasawa_coeffs(psi1, psi1_inv, psi2, threshold=RCOND_THRESHOLD):
    """Batched pair split ``(psi1, psi2) = (Psi, Psi) (L_-^{-1}, L_+^{-1})``.

    Returns a dict with ``psi``, ``l_minus``, ``l_plus``, ``ell_plus`` (the
    Birkhoff complement, ``= L_+^{-1}``), ``rcond``, ``ok``, ``tail``.
    """
    D, tail_d = mul_coeffs(psi1_inv, psi2)
    d_minus, ell_plus, m, rcond, ok = birkhoff_minus_plus_coeffs(D, threshold)
    psi, tail_p = mul_coeffs(psi1, np.where(ok[..., None, None, None], d_minus, 0.0))
    psi = np.where(ok[..., None, None, None], psi, np.nan)
    return {
        "psi": psi,
        "l_minus": d_minus,
        "l_plus": m,
        "ell_plus": ell_plus,
        "rcond": rcond,
        "ok": ok,
        "tail": tail_d + tail_p,
    }


def iwasawa_pair_split(psi1, psi2, threshold=RCOND_THRESHOLD):
    """Split a pair of loops through ``D = psi1^{-1} psi2``.

    Returns ``(Psi, L_minus, L_plus, diagnostics)`` with
    ``Psi = psi1 L_minus = psi2 L_plus``.
    """
    N = max(psi1.N, psi2.N)
    psi1, psi2 = psi1.promote(N), psi2.promote(N)
    inv1 = loop_invert(psi1)
    out = iwasawa_coeffs(psi1.coeffs, inv1.coeffs, psi2.coeffs, threshold)
    if not out["ok"]:
        raise BigCellFailure(
            "pair is off the Iwasawa big cell (rcond %.3g)" % out["rcond"], rcond=float(out["rcond"]))
    tw = psi1.twisted and psi2.twisted
    base_tail = psi1.tail_loss + psi2.tail_loss + inv1.tail_loss
    Psi = TruncatedLoop(out["psi"], tw, base_tail + float(out["tail"]))
    Lm = TruncatedLoop(out["l_minus"], tw)
    Lp = TruncatedLoop(out["l_plus"], tw)
    a, _ = mul_coeffs(psi1.coeffs, Lm.coeffs)
    b, _ = mul_coeffs(psi2.coeffs, Lp.coeffs)
    diag = {"consistency": float(norm_coeffs(a - b)), "rcond": float(out["rcond"])}
    return Psi, Lm, Lp, diag
