"""Truncated matrix Laurent polynomials in the real spectral parameter.

Coefficients are stored densely as an array of shape ``(2N+1, 2, 2)`` with
exponent ``k`` at index ``k + N``.  The module-level ``*_coeffs`` kernels
work on arrays with arbitrary leading batch axes ``(..., 2N+1, 2, 2)``;
:class:`TruncatedLoop` wraps a single loop for interactive use.

A loop is *twisted* when even exponents carry diagonal matrices and odd
exponents off-diagonal ones, i.e. it is fixed by ``X(lam) -> Ad(k') X(-lam)``.
"""

import numpy as np

from .errors import InvalidArgument, NotInvertibleError, TruncationOverflow

DEFAULT_N = 16
TAIL_BUDGET = 1e-8

PARTS = ("plus", "minus", "plus_star", "minus_star", "k_part", "m_part")

_DIAG = np.array([[1.0, 0.0], [0.0, 1.0]])
_OFF = np.array([[0.0, 1.0], [1.0, 0.0]])


# ---------------------------------------------------------------------------
# array kernels


def order_of(coeffs):
    return (np.shape(coeffs)[-3] - 1) // 2


def exponents(N):
    return np.arange(-N, N + 1)


def mat_norm1(A):
    """Max column sum |A|_1 of (stacks of) 2x2 matrices."""
    return np.abs(A).sum(axis=-2).max(axis=-1)


def norm_coeffs(c):
    return mat_norm1(c).sum(axis=-1)


def _support(c, axis_len):
    flat = np.abs(c).reshape(-1, axis_len, 4).max(axis=(0, 2))
    return np.nonzero(flat)[0]


def mul_coeffs(a, b):
    """Truncated Cauchy product.

    Returns ``(c, tail)`` where ``tail`` is the (per batch element) norm of
    the coefficients that fell outside the window.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    M = a.shape[-3]
    if b.shape[-3] != M:
        raise InvalidArgument("truncation orders differ; promote first")
    N = (M - 1) // 2
    shape = np.broadcast_shapes(a.shape[:-3], b.shape[:-3])
    full = np.zeros(shape + (2 * M - 1, 2, 2))
    sa = _support(a, M)
    sb = _support(b, M)
    if len(sa) <= len(sb):
        for i in sa:
            full[..., i:i + M, :, :] += a[..., i:i + 1, :, :] @ b
    else:
        for j in sb:
            full[..., j:j + M, :, :] += a @ b[..., j:j + 1, :, :]
    # full index n corresponds to exponent n - 2N
    c = full[..., N:N + M, :, :].copy()
    tail = norm_coeffs(full[..., :N, :, :]) + norm_coeffs(full[..., N + M:, :, :])
    return c, tail


def identity_coeffs(N, batch=()):
    c = np.zeros(tuple(batch) + (2 * N + 1, 2, 2))
    c[..., N, :, :] = np.eye(2)
    return c


def evaluate_coeffs(c, lam0):
    N = order_of(c)
    powers = float(lam0) ** exponents(N)
    return np.einsum("...kij,k->...ij", c, powers)


def scaled_derivative_coeffs(c):
    N = order_of(c)
    return c * exponents(N)[:, None, None]


def project_coeffs(c, part):
    N = order_of(c)
    k = exponents(N)
    out = np.array(c, dtype=float, copy=True)
    if part == "plus":
        out[..., k < 0, :, :] = 0.0
    elif part == "minus":
        out[..., k > 0, :, :] = 0.0
    elif part == "plus_star":
        out[..., k <= 0, :, :] = 0.0
    elif part == "minus_star":
        out[..., k >= 0, :, :] = 0.0
    elif part == "k_part":
        out = out * _DIAG
    elif part == "m_part":
        out = out * _OFF
    else:
        raise InvalidArgument("unknown part %r; expected one of %s" % (part, ", ".join(PARTS)))
    return out


def twist_defect(c):
    """Largest entry that violates the twisting pattern."""
    N = order_of(c)
    odd = (exponents(N) % 2).astype(bool)
    bad = np.where(odd[:, None, None], _DIAG, _OFF)
    return float(np.max(np.abs(c * bad), initial=0.0))


def flip_coeffs(c):
    """lam -> 1/lam."""
    return np.asarray(c)[..., ::-1, :, :]


def invert_one_sided_plus(a):
    """Inverse of a loop supported on exponents >= 0 (batched).

    Solves the lower block-triangular Toeplitz system by forward
    substitution; exact up to the window edge.
    """
    a = np.asarray(a, dtype=float)
    N = order_of(a)
    a0 = a[..., N, :, :]
    det = a0[..., 0, 0] * a0[..., 1, 1] - a0[..., 0, 1] * a0[..., 1, 0]
    scale = np.maximum(np.abs(a0).max(axis=(-2, -1)), 1e-300)
    if np.any(np.abs(det) <= 1e-14 * scale ** 2):
        raise NotInvertibleError("lambda^0 coefficient is singular")
    b0 = np.linalg.inv(a0)
    b = np.zeros_like(a)
    b[..., N, :, :] = b0
    pos = a[..., N:, :, :]
    for k in range(1, N + 1):
        # sum_{j=1..k} a_j b_{k-j}
        acc = np.einsum("...jab,...jbc->...ac", pos[..., 1:k + 1, :, :],
                        b[..., N + k - 1:N - 1:-1, :, :])
        b[..., N + k, :, :] = -b0 @ acc
    return b


def invert_coeffs(a):
    """Inverse in the truncated loop algebra (batched).

    One-sided loops use forward substitution; two-sided loops solve the
    square block-Toeplitz system ``sum_j a_{k-j} b_j = delta_k0`` over the
    full window.
    """
    a = np.asarray(a, dtype=float)
    N = order_of(a)
    sup = _support(a, 2 * N + 1) - N
    if len(sup) == 0:
        raise NotInvertibleError("zero loop")
    if sup.min() >= 0:
        return invert_one_sided_plus(a)
    if sup.max() <= 0:
        return flip_coeffs(invert_one_sided_plus(flip_coeffs(a)))
    M = 2 * N + 1
    kk = np.arange(M)
    idx = kk[:, None] - kk[None, :] + N
    valid = (idx >= 0) & (idx < M)
    blocks = a[..., np.clip(idx, 0, M - 1), :, :] * valid[:, :, None, None]
    T = np.swapaxes(blocks, -3, -2).reshape(a.shape[:-3] + (2 * M, 2 * M))
    rhs = np.zeros(a.shape[:-3] + (2 * M, 2))
    rhs[..., 2 * N:2 * N + 2, :] = np.eye(2)
    s = np.linalg.svd(T, compute_uv=False)
    if np.any(s[..., -1] <= 1e-13 * s[..., 0]):
        raise NotInvertibleError("block-Toeplitz system singular at this truncation")
    sol = np.linalg.solve(T, rhs)
    return sol.reshape(a.shape[:-3] + (M, 2, 2))


# ---------------------------------------------------------------------------
# value type


class TruncatedLoop:
    """A 2x2-matrix Laurent polynomial with exponents in [-N, N].

    Instances are treated as immutable; ``coeffs`` is read-only.
    ``tail_loss`` accumulates the norm of coefficients dropped by
    truncation in the operations that produced this value.
    """

    __slots__ = ("coeffs", "twisted", "tail_loss")

    def __init__(self, coeffs, twisted=False, tail_loss=0.0):
        c = np.array(coeffs, dtype=float)
        if c.ndim != 3 or c.shape[1:] != (2, 2) or c.shape[0] % 2 != 1:
            raise InvalidArgument("coeffs must have shape (2N+1, 2, 2), got %r" % (c.shape,))
        c.setflags(write=False)
        self.coeffs = c
        self.twisted = bool(twisted)
        self.tail_loss = float(tail_loss)

    # constructors -------------------------------------------------------
    @classmethod
    def from_terms(cls, terms, N=DEFAULT_N, twisted=False):
        """Build from a mapping ``{exponent: 2x2 matrix}``."""
        c = np.zeros((2 * N + 1, 2, 2))
        for k, A in terms.items():
            if abs(k) > N:
                raise InvalidArgument("exponent %d outside window [-%d, %d]" % (k, N, N))
            c[k + N] += np.asarray(A, dtype=float)
        return cls(c, twisted=twisted)

    @classmethod
    def identity(cls, N=DEFAULT_N):
        return cls(identity_coeffs(N), twisted=True)

    @classmethod
    def zero(cls, N=DEFAULT_N):
        return cls(np.zeros((2 * N + 1, 2, 2)), twisted=True)

    @classmethod
    def constant(cls, A, N=DEFAULT_N, twisted=False):
        return cls.from_terms({0: A}, N, twisted)

    # accessors ----------------------------------------------------------
    @property
    def N(self):
        return (self.coeffs.shape[0] - 1) // 2

    def coeff(self, k):
        if abs(k) > self.N:
            return np.zeros((2, 2))
        return self.coeffs[k + self.N].copy()

    def support(self):
        """Exponents with a nonzero coefficient."""
        return [int(k) - self.N for k in _support(self.coeffs, 2 * self.N + 1)]

    def promote(self, N):
        if N < self.N:
            raise InvalidArgument("cannot promote to a smaller truncation order")
        if N == self.N:
            return self
        c = np.zeros((2 * N + 1, 2, 2))
        c[N - self.N:N + self.N + 1] = self.coeffs
        return TruncatedLoop(c, self.twisted, self.tail_loss)

    # arithmetic ---------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, TruncatedLoop):
            N = max(self.N, other.N)
            return self.promote(N), other.promote(N)
        return None, None

    def __add__(self, other):
        a, b = self._coerce(other)
        if a is None:
            return NotImplemented
        return TruncatedLoop(a.coeffs + b.coeffs, a.twisted and b.twisted,
                             a.tail_loss + b.tail_loss)

    def __sub__(self, other):
        a, b = self._coerce(other)
        if a is None:
            return NotImplemented
        return TruncatedLoop(a.coeffs - b.coeffs, a.twisted and b.twisted,
                             a.tail_loss + b.tail_loss)

    def __neg__(self):
        return TruncatedLoop(-self.coeffs, self.twisted, self.tail_loss)

    def __mul__(self, other):
        if isinstance(other, TruncatedLoop):
            return loop_multiply(self, other)
        if np.isscalar(other):
            return TruncatedLoop(self.coeffs * float(other), self.twisted, self.tail_loss)
        return NotImplemented

    def __rmul__(self, other):
        if np.isscalar(other):
            return self * other
        return NotImplemented

    def __repr__(self):
        terms = ", ".join("%d: %s" % (k, self.coeff(k).tolist()) for k in self.support())
        return "TruncatedLoop(N=%d, twisted=%s, {%s})" % (self.N, self.twisted, terms)

    # text form ----------------------------------------------------------
    def to_text(self):
        lines = []
        for k in range(-self.N, self.N + 1):
            a = self.coeffs[k + self.N]
            lines.append("%d %r %r %r %r" % (k, float(a[0, 0]), float(a[0, 1]),
                                              float(a[1, 0]), float(a[1, 1])))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, N=None, tol=1e-12):
        terms = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 5:
                raise InvalidArgument("line %d: expected 'k a11 a12 a21 a22'" % lineno)
            try:
                k = int(parts[0])
                vals = [float(p) for p in parts[1:]]
            except ValueError as exc:
                raise InvalidArgument("line %d: %s" % (lineno, exc)) from None
            terms[k] = np.array(vals).reshape(2, 2) + terms.get(k, 0.0)
        if not terms:
            raise InvalidArgument("no coefficients found")
        width = max(abs(k) for k in terms)
        loop = cls.from_terms(terms, N=max(width, N or 0, 1))
        return TruncatedLoop(loop.coeffs, twisted=check_twisted(loop, tol))


# ---------------------------------------------------------------------------
# operations on TruncatedLoop


def _pair(a, b):
    N = max(a.N, b.N)
    return a.promote(N), b.promote(N)


def loop_multiply(a, b):
    a, b = _pair(a, b)
    c, tail = mul_coeffs(a.coeffs, b.coeffs)
    return TruncatedLoop(c, a.twisted and b.twisted, a.tail_loss + b.tail_loss + float(tail))


def loop_invert(a):
    """Inverse of ``a`` at its truncation order.

    ``tail_loss`` of the result includes the norm of ``a * a^-1 - 1``
    (the part of the true inverse the window cannot hold).
    """
    b = invert_coeffs(a.coeffs)
    c, tail = mul_coeffs(a.coeffs, b)
    resid = norm_coeffs(c - identity_coeffs(a.N)) + tail
    return TruncatedLoop(b, a.twisted, a.tail_loss + float(resid))


def evaluate(a, lam0):
    if not lam0 > 0:
        raise InvalidArgument("spectral parameter must be positive, got %r" % (lam0,))
    return evaluate_coeffs(a.coeffs, lam0)


def lambda_scaled_derivative(a):
    """lam d/dlam, i.e. d/dt with lam = e^t."""
    return TruncatedLoop(scaled_derivative_coeffs(a.coeffs), a.twisted, a.tail_loss)


def loop_norm(a):
    return float(norm_coeffs(a.coeffs))


def graded_project(a, part):
    return TruncatedLoop(project_coeffs(a.coeffs, part), a.twisted, a.tail_loss)


def check_twisted(a, tol=1e-10):
    return twist_defect(a.coeffs) <= tol


def check_tail(total, budget=TAIL_BUDGET):
    if total > budget:
        raise TruncationOverflow(
            "cumulative truncation loss %.3g exceeds %.1g; increase the truncation order N"
            % (total, budget))
