"""Optional SVG output (needs matplotlib)."""
from __future__ import annotations

from pathlib import Path

import numpy as np


def available():
    try:
        import matplotlib  # noqa: F401
    except ImportError:
        return False
    return True


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "superl"
    return plt


def _save(fig, path):
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def line_plot(path, x, series, xlabel="", ylabel="", logx=False, logy=False, title=""):
    """One SVG line chart; ``series`` maps labels to y arrays."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, y in series.items():
        ax.plot(x, y, marker="o", ms=3, label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(series) > 1:
        ax.legend()
    fig.tight_layout()
    out = _save(fig, path)
    plt.close(fig)
    return out


def heatmap(path, grid, values, title=""):
    plt = _pyplot()
    vals = np.where(grid.inside, values, np.nan)
    fig, ax = plt.subplots(figsize=(4.5, 4))
    im = ax.imshow(vals, origin="lower", extent=(grid.xs[0], grid.xs[-1], grid.ys[0], grid.ys[-1]))
    fig.colorbar(im, ax=ax)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    out = _save(fig, path)
    plt.close(fig)
    return out


def radial_profile(path, grid, values, center=(0.0, 0.0), title="u along the x axis"):
    i = grid.node_index(center)[0]
    row = values[i]
    sel = grid.inside[i]
    return line_plot(path, grid.xs[sel] - center[0], {"profile": row[sel]}, "x", "value", title=title)
