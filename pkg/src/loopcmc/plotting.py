"""Static figures for a run: the surface and a panel of measured fields."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# PNG metadata without version strings keeps reruns byte-identical
_META = {"Software": None}


def plot_surface(path, patch, title=""):
    fig = plt.figure(figsize=(6, 5))
    ax = fig.add_subplot(111, projection="3d")
    p = patch.points
    ax.plot_surface(p[..., 1], p[..., 2], p[..., 0], cmap="viridis", linewidth=0, antialiased=False,
                    rstride=1, cstride=1)
    ax.set_xlabel("u2")
    ax.set_ylabel("u3")
    ax.set_zlabel("u1 (timelike)")
    ax.set_title(title or "surface, lambda0 = %g" % patch.lambda0)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)


def plot_fields(path, patch, data, rcond=None):
    g = patch.grid
    extent = (g.y_min, g.y_max, g.x_min, g.x_max)
    panels = [("omega", data.omega), ("H", np.where(data.valid, data.H, np.nan)),
              ("Q", data.Q), ("R", data.R)]
    if rcond is not None:
        with np.errstate(divide="ignore"):
            panels.append(("log10 rcond", np.log10(rcond)))
    panels.append(("failure mask", patch.failure_mask.astype(float)))
    fig, axes = plt.subplots(2, 3, figsize=(11, 6.5))
    for ax, (name, arr) in zip(axes.ravel(), panels):
        im = ax.imshow(arr, origin="lower", extent=extent, aspect="auto", cmap="magma")
        ax.set_title(name)
        ax.set_xlabel("y")
        ax.set_ylabel("x")
        fig.colorbar(im, ax=ax, shrink=0.8)
    for ax in axes.ravel()[len(panels):]:
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=90, metadata=_META)
    plt.close(fig)
