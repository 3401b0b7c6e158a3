"""Summaries of per-point residual fields."""

import numpy as np


def interior_mask(shape, margin=1):
    """Points at least ``margin`` steps from the grid edge."""
    m = np.zeros(shape, dtype=bool)
    m[margin:shape[0] - margin, margin:shape[1] - margin] = True
    return m


def summarize(values, xs, ys, where=None):
    """Max, mean and location of the max of ``|values|`` over finite entries.

    ``where`` restricts the points considered (e.g. interior, unmasked).
    """
    v = np.abs(np.asarray(values, dtype=float))
    ok = np.isfinite(v)
    if where is not None:
        ok &= where
    if not np.any(ok):
        return {"max": float("nan"), "mean": float("nan"), "argmax": None, "count": 0}
    vv = np.where(ok, v, -np.inf)
    i, j = np.unravel_index(int(np.argmax(vv)), v.shape)
    return {
        "max": float(v[i, j]),
        "mean": float(v[ok].mean()),
        "argmax": [float(xs[i]), float(ys[j])],
        "count": int(ok.sum()),
    }
