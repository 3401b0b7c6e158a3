"""Normalized potentials and the built-in examples.

A potential pair is held as two vectorized term maps: ``terms_x(xs)``
returns ``{exponent: array (len(xs), 2, 2)}`` for the dx-form and
``terms_y`` the same for the dy-form.  Loop values are assembled on demand.
"""

import numpy as np
from scipy.integrate import quad

from .errors import InvalidArgument
from .loops import TruncatedLoop, check_twisted

BUILTIN_NAMES = ("hyperbolic_cylinder", "circular_cylinder", "pseudosphere", "bscroll_example")

# Grids on which the built-ins are meant to be run.  The B-scroll data is
# singular on x - y = -1; second derivatives of the framing grow fast
# towards that line, so it gets a small square around the origin.
BUILTIN_GRIDS = {
    "hyperbolic_cylinder": (-1.0, 1.0, -1.0, 1.0),
    "circular_cylinder": (-1.0, 1.0, -1.0, 1.0),
    "pseudosphere": (-1.0, 1.0, -1.0, 1.0),
    "bscroll_example": (-0.1, 0.1, -0.1, 0.1),
}


class ScalarFunction:
    """Smooth real function of one variable.

    kinds:
      ``poly``       sum c_k x^k
      ``exp_poly``   exp(sum c_k x^k), strictly positive
      ``pow_affine`` scale * (shift + slope x)^power
    """

    KINDS = ("poly", "exp_poly", "pow_affine")

    def __init__(self, kind, params):
        if kind not in self.KINDS:
            raise InvalidArgument("unknown function kind %r (expected one of %s)" % (kind, self.KINDS))
        if kind == "pow_affine":
            p = dict(params)
            missing = {"scale", "shift", "slope", "power"} - set(p)
            extra = set(p) - {"scale", "shift", "slope", "power"}
            if missing or extra:
                raise InvalidArgument("pow_affine needs exactly scale, shift, slope, power")
            self.params = {k: float(v) for k, v in p.items()}
        else:
            c = np.atleast_1d(np.asarray(params, dtype=float))
            if c.ndim != 1 or c.size == 0 or not np.all(np.isfinite(c)):
                raise InvalidArgument("%s coefficients must be a non-empty list of finite numbers" % kind)
            self.params = c
        self.kind = kind

    @classmethod
    def constant(cls, c):
        return cls("poly", [c])

    @classmethod
    def poly(cls, coeffs):
        return cls("poly", coeffs)

    @classmethod
    def exp_poly(cls, coeffs):
        return cls("exp_poly", coeffs)

    @classmethod
    def pow_affine(cls, scale, shift, slope, power):
        return cls("pow_affine", dict(scale=scale, shift=shift, slope=slope, power=power))

    @classmethod
    def from_config(cls, entry):
        """Parse ``{"poly": [...]}``, ``{"exp_poly": [...]}``, ``{"pow_affine": {...}}`` or a bare number."""
        if isinstance(entry, (int, float)) and not isinstance(entry, bool):
            return cls.constant(float(entry))
        if not isinstance(entry, dict) or len(entry) != 1:
            raise InvalidArgument("function entry must be a number or a single-key object, got %r" % (entry,))
        (kind, params), = entry.items()
        return cls(kind, params)

    def to_config(self):
        if self.kind == "pow_affine":
            return {"pow_affine": dict(self.params)}
        return {self.kind: [float(c) for c in self.params]}

    @property
    def is_constant(self):
        if self.kind == "pow_affine":
            return self.params["slope"] == 0.0 or self.params["power"] == 0.0
        return bool(np.all(self.params[1:] == 0.0))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "poly":
            return np.polynomial.polynomial.polyval(x, self.params)
        if self.kind == "exp_poly":
            return np.exp(np.polynomial.polynomial.polyval(x, self.params))
        p = self.params
        base = p["shift"] + p["slope"] * x
        with np.errstate(divide="ignore", invalid="ignore"):
            return p["scale"] * np.power(base, p["power"])

    def integral(self, x):
        """Antiderivative vanishing at 0: exact for poly and pow_affine,
        exact for exp of a degree <= 1 polynomial, quadrature otherwise."""
        x = np.asarray(x, dtype=float)
        if self.kind == "poly":
            P = np.polynomial.Polynomial(self.params).integ()
            return P(x) - P(0.0)
        if self.kind == "exp_poly":
            c = self.params
            if c.size == 1 or np.all(c[2:] == 0.0):
                a = c[1] if c.size > 1 else 0.0
                if a == 0.0:
                    return np.exp(c[0]) * x
                return np.exp(c[0]) * np.expm1(a * x) / a
            return self._quad(x)
        p = self.params
        s, m, k, a = p["scale"], p["shift"], p["slope"], p["power"]
        if k == 0.0:
            return s * m ** a * x
        base = m + k * x
        if a == -1.0:
            return s / k * np.log(base / m)
        return s / (k * (a + 1.0)) * (np.power(base, a + 1.0) - m ** (a + 1.0))

    def _quad(self, x):
        flat = np.ravel(x)
        out = np.array([quad(lambda t: float(self(t)), 0.0, v, epsabs=1e-14, epsrel=1e-13)[0] for v in flat])
        return out.reshape(np.shape(x))

    def __repr__(self):
        return "ScalarFunction(%r, %r)" % (self.kind, self.params if self.kind == "pow_affine" else list(self.params))


def _as_function(v):
    if isinstance(v, ScalarFunction):
        return v
    if isinstance(v, (int, float)):
        return ScalarFunction.constant(float(v))
    raise InvalidArgument("expected a ScalarFunction or number, got %r" % (v,))


class PotentialPair:
    """A (1,0)-potential and a (0,1)-potential.

    ``terms_x(xs)`` / ``terms_y(ys)`` return dicts of coefficient arrays.
    ``meta`` keeps the scalar data (Q, R, f, g, kind) when known.
    """

    def __init__(self, H, terms_x, terms_y, name="custom", meta=None):
        self.H = None if H is None else float(H)
        self.terms_x = terms_x
        self.terms_y = terms_y
        self.name = name
        self.meta = dict(meta or {})

    def _loop(self, terms, t, N, window):
        lo, hi = window
        d = {}
        for k, arr in terms(np.atleast_1d(float(t))).items():
            if k < lo or k > hi:
                if np.any(arr != 0.0):
                    raise InvalidArgument("potential term at exponent %d outside window [%s, %s]" % (k, lo, hi))
                continue
            d[k] = arr[0]
        return TruncatedLoop.from_terms(d, N, twisted=True)

    def xi1(self, x, N=16):
        """dx-coefficient at x as a loop (exponents <= 1)."""
        return self._loop(self.terms_x, x, N, (-N, 1))

    def xi2(self, y, N=16):
        """dy-coefficient at y as a loop (exponents >= -1)."""
        return self._loop(self.terms_y, y, N, (-1, N))

    def check(self, xs, ys, tol=1e-10):
        """True when sampled values are twisted and respect the degree windows."""
        for x in np.atleast_1d(xs):
            if not check_twisted(self.xi1(x), tol):
                return False
        for y in np.atleast_1d(ys):
            if not check_twisted(self.xi2(y), tol):
                return False
        return True

    def __repr__(self):
        return "PotentialPair(name=%r, H=%r)" % (self.name, self.H)


def _require_positive(fn, t, label):
    v = fn(t)
    if not np.all(np.isfinite(v)) or np.any(v <= 0.0):
        raise InvalidArgument("%s must be strictly positive on the domain" % label)
    return v


def normalized_potentials(H, Q, R, f=1.0, g=1.0, name="normalized"):
    """dx-form lam [[0, -(H/2) f], [Q/f, 0]], dy-form lam^-1 [[0, -R/g], [(H/2) g, 0]]."""
    if H is None or not np.isfinite(H) or H == 0.0:
        raise InvalidArgument("mean curvature H must be a nonzero finite number")
    H = float(H)
    Q, R, f, g = (_as_function(v) for v in (Q, R, f, g))
    for fn, label in ((f, "f"), (g, "g")):
        if fn.is_constant:
            _require_positive(fn, 0.0, label)

    def terms_x(xs):
        xs = np.asarray(xs, dtype=float)
        fv = _require_positive(f, xs, "f")
        out = np.zeros(xs.shape + (2, 2))
        out[..., 0, 1] = -0.5 * H * fv
        out[..., 1, 0] = Q(xs) / fv
        return {1: out}

    def terms_y(ys):
        ys = np.asarray(ys, dtype=float)
        gv = _require_positive(g, ys, "g")
        out = np.zeros(ys.shape + (2, 2))
        out[..., 0, 1] = -R(ys) / gv
        out[..., 1, 0] = 0.5 * H * gv
        return {-1: out}

    meta = {"kind": "normalized", "Q": Q, "R": R, "f": f, "g": g}
    return PotentialPair(H, terms_x, terms_y, name=name, meta=meta)


def bscroll_potentials(H, R, f=1.0, g=1.0, name="bscroll"):
    """Normalized potentials with Q = 0 (upper-triangular dx-form)."""
    pot = normalized_potentials(H, 0.0, R, f, g, name=name)
    pot.meta["kind"] = "bscroll"
    return pot


def dalembert_potentials(H, epsilon, f=1.0, g=1.0, name=None):
    """Q = H/2, R = epsilon H/2: sinh-Gordon (+1), Liouville (0), cosh-Gordon (-1)."""
    if epsilon not in (-1, 0, 1):
        raise InvalidArgument("epsilon must be -1, 0 or 1")
    if H is None or H == 0.0:
        raise InvalidArgument("mean curvature H must be nonzero")
    name = name or ("dalembert_%+d" % epsilon if epsilon else "dalembert_0")
    pot = normalized_potentials(H, 0.5 * H, 0.5 * epsilon * H, f, g, name=name)
    pot.meta.update(kind="dalembert", epsilon=int(epsilon))
    return pot


def builtin_potential(name):
    if name == "hyperbolic_cylinder":
        return normalized_potentials(0.5, -0.25, -0.25, 1.0, 1.0, name=name)
    if name == "circular_cylinder":
        return normalized_potentials(0.5, 0.25, 0.25, 1.0, 1.0, name=name)
    if name == "pseudosphere":
        return normalized_potentials(0.5, 0.0, 0.0, 1.0, 1.0, name=name)
    if name == "bscroll_example":
        # H = 1, R = y - 1/2, f = 2 (x+1)^-2, g = 2 (1-y)^-2
        f = ScalarFunction.pow_affine(2.0, 1.0, 1.0, -2.0)
        g = ScalarFunction.pow_affine(2.0, 1.0, -1.0, -2.0)
        R = ScalarFunction.poly([-0.5, 1.0])
        return bscroll_potentials(1.0, R, f, g, name=name)
    raise InvalidArgument("unknown builtin %r; valid names: %s" % (name, ", ".join(BUILTIN_NAMES)))


def tabulated_potentials(H, xs, terms_x, ys, terms_y, name="extracted"):
    """Potentials given by samples on the axes, interpolated by cubic splines."""
    from scipy.interpolate import CubicSpline

    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    splines_x = {k: CubicSpline(xs, v, axis=0) for k, v in terms_x.items()}
    splines_y = {k: CubicSpline(ys, v, axis=0) for k, v in terms_y.items()}

    def tx(t):
        return {k: s(np.asarray(t, dtype=float)) for k, s in splines_x.items()}

    def ty(t):
        return {k: s(np.asarray(t, dtype=float)) for k, s in splines_y.items()}

    meta = {"kind": "tabulated", "samples_x": (xs, terms_x), "samples_y": (ys, terms_y)}
    return PotentialPair(H, tx, ty, name=name, meta=meta)


def potential_from_config(entry):
    """Build a PotentialPair from a config mapping; unknown keys are errors."""
    if not isinstance(entry, dict):
        raise InvalidArgument("potential entry must be an object")
    allowed = {"H", "kind", "Q", "R", "f", "g", "epsilon", "name"}
    unknown = set(entry) - allowed
    if unknown:
        raise InvalidArgument("unknown potential keys: %s" % ", ".join(sorted(unknown)))
    kind = entry.get("kind", "builtin" if "name" in entry else None)
    fn = lambda key, default: ScalarFunction.from_config(entry[key]) if key in entry else _as_function(default)

    def need_H():
        if "H" not in entry:
            raise InvalidArgument("potential kind %r requires H" % kind)
        return float(entry["H"])

    if kind == "builtin":
        if "name" not in entry:
            raise InvalidArgument("builtin potential requires name")
        extra = set(entry) - {"kind", "name"}
        if extra:
            raise InvalidArgument("builtin potential takes only name, got %s" % ", ".join(sorted(extra)))
        return builtin_potential(entry["name"])
    if kind == "normalized":
        for key in ("Q", "R"):
            if key not in entry:
                raise InvalidArgument("normalized potential requires %s" % key)
        return normalized_potentials(need_H(), fn("Q", 0.0), fn("R", 0.0), fn("f", 1.0), fn("g", 1.0),
                                     name=entry.get("name", "normalized"))
    if kind == "bscroll":
        if "Q" in entry:
            raise InvalidArgument("bscroll potential has Q = 0; do not pass Q")
        return bscroll_potentials(need_H(), fn("R", 0.0), fn("f", 1.0), fn("g", 1.0),
                                  name=entry.get("name", "bscroll"))
    if kind == "dalembert":
        if "epsilon" not in entry:
            raise InvalidArgument("dalembert potential requires epsilon")
        if "Q" in entry or "R" in entry:
            raise InvalidArgument("dalembert potential fixes Q and R; do not pass them")
        eps = entry["epsilon"]
        if eps not in (-1, 0, 1) or isinstance(eps, bool):
            raise InvalidArgument("epsilon must be -1, 0 or 1")
        return dalembert_potentials(need_H(), int(eps), fn("f", 1.0), fn("g", 1.0), name=entry.get("name"))
    raise InvalidArgument("potential kind must be one of normalized, bscroll, dalembert, builtin")
