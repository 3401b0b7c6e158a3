"""Minkowski 3-space realised as sl(2,R).

A vector (u1, u2, u3) is identified with u1*i + u2*j' + u3*k' where

    i  = [[0, -1], [1, 0]]
    j' = [[0,  1], [1, 0]]
    k' = [[-1, 0], [0, 1]]

and the Lorentz product is <X, Y> = tr(XY) / 2, of signature (-, +, +).
All functions accept stacked inputs (leading batch axes).
"""

import numpy as np

from .errors import InvalidArgument

I_ = np.array([[0.0, -1.0], [1.0, 0.0]])
J_ = np.array([[0.0, 1.0], [1.0, 0.0]])
K_ = np.array([[-1.0, 0.0], [0.0, 1.0]])
ONE = np.eye(2)
BASIS = (I_, J_, K_)

TRACE_TOL = 1e-10
DET_TOL = 1e-9


def vector_to_matrix(v):
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != 3:
        raise InvalidArgument("expected trailing dimension 3, got %r" % (v.shape,))
    u1, u2, u3 = v[..., 0], v[..., 1], v[..., 2]
    out = np.empty(v.shape[:-1] + (2, 2))
    out[..., 0, 0] = -u3
    out[..., 0, 1] = u2 - u1
    out[..., 1, 0] = u1 + u2
    out[..., 1, 1] = u3
    return out


def matrix_to_vector(X, tol=TRACE_TOL):
    X = np.asarray(X, dtype=float)
    tr = X[..., 0, 0] + X[..., 1, 1]
    if np.any(np.abs(tr) > tol):
        raise InvalidArgument("matrix is not trace-free (|tr| = %.3g)" % np.max(np.abs(tr)))
    out = np.empty(X.shape[:-2] + (3,))
    out[..., 0] = 0.5 * (X[..., 1, 0] - X[..., 0, 1])
    out[..., 1] = 0.5 * (X[..., 1, 0] + X[..., 0, 1])
    out[..., 2] = 0.5 * (X[..., 1, 1] - X[..., 0, 0])
    return out


def lorentz_inner(X, Y):
    """<X, Y> = tr(XY)/2 for (stacks of) 2x2 matrices."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    return 0.5 * np.einsum("...ij,...ji->...", X, Y)


def minkowski_dot(v, w):
    """Coordinate form -v1 w1 + v2 w2 + v3 w3."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    return -v[..., 0] * w[..., 0] + v[..., 1] * w[..., 1] + v[..., 2] * w[..., 2]


def det2(g):
    g = np.asarray(g)
    return g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]


def inv2(g):
    """Inverse of (stacks of) 2x2 matrices via the adjugate."""
    g = np.asarray(g)
    d = det2(g)
    adj = np.empty_like(g)
    adj[..., 0, 0] = g[..., 1, 1]
    adj[..., 1, 1] = g[..., 0, 0]
    adj[..., 0, 1] = -g[..., 0, 1]
    adj[..., 1, 0] = -g[..., 1, 0]
    return adj / d[..., None, None]


def ad_action(g, X, tol=DET_TOL):
    """Ad(g)X = g X g^-1 for unit-determinant g."""
    g = np.asarray(g, dtype=float)
    d = det2(g)
    if np.any(np.abs(d - 1.0) > tol * np.maximum(1.0, np.abs(d))):
        raise InvalidArgument("group element must have det 1 (got %r)" % d)
    return g @ np.asarray(X, dtype=float) @ inv2(g)


def commutator(X, Y):
    return X @ Y - Y @ X
