"""Static figure for a 2-D region estimate: filled mask cells over the oracle outline."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .estimator import IN, UNDECIDED, GridEstimate  # noqa: E402

# fixed ids and no timestamp, so identical inputs give identical files
plt.rcParams["svg.hashsalt"] = "dalyap"
plt.rcParams["svg.fonttype"] = "none"


def render_region_svg(grid: GridEstimate, path, title: str | None = None) -> Path:
    if grid.dim != 2:
        raise ValueError("region figures are only drawn for 2-D maps")
    path = Path(path)
    (x_lo, x_hi), (y_lo, y_hi) = grid.window
    extent = (x_lo, x_hi, y_lo, y_hi)
    fig, ax = plt.subplots(figsize=(5.0, 5.0 * (y_hi - y_lo) / (x_hi - x_lo) if x_hi > x_lo else 5.0))
    # arrays are indexed [ix, iy]; imshow wants rows = y
    if grid.mask is not None:
        ax.imshow(
            np.where(grid.mask.T, 1.0, np.nan), origin="lower", extent=extent,
            cmap="Blues", vmin=0.0, vmax=1.5, interpolation="nearest", aspect="auto",
        )
    undecided = grid.classes == UNDECIDED
    if undecided.any():
        ax.imshow(
            np.where(undecided.T, 1.0, np.nan), origin="lower", extent=extent,
            cmap="Greys", vmin=0.0, vmax=2.0, interpolation="nearest", aspect="auto",
        )
    xs, ys = grid.axes()
    inside = (grid.classes == IN).astype(float).T
    if 0.0 < inside.mean() < 1.0:
        ax.contour(xs, ys, inside, levels=[0.5], colors="k", linewidths=1.0)
    ax.set_xlim(x_lo, x_hi)
    ax.set_ylim(y_lo, y_hi)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
