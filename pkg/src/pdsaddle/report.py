"""Optional figure rendering for the CLI report path.

Matplotlib is imported lazily with the Agg backend so that the core library
never needs a display; every function writes a PNG next to the delimited
output and returns the path.
"""

from __future__ import annotations

import os
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .operators import ImageGrid
from .solver import IterateTrace


def _plt():
    import matplotlib
    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt
    return plt


def fig_curves(path, curves: Sequence[Tuple[str, np.ndarray]], ylabel: str,
               logy: bool = True):
    """Plot named per-iteration series (nonpositive values drop on log axes)."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, ys in curves:
        ys = np.asarray(ys, dtype=float)
        ax.plot(np.arange(len(ys)), ys, label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel(ylabel)
    if len(curves) > 1 or (curves and curves[0][0]):
        ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def fig_trace(trace: IterateTrace, outdir, stem: str,
              x_true: Optional[np.ndarray] = None) -> List[str]:
    """Distance and iterate figures for a solve trace.

    Uses the dist-to-saddle column when present, else the distance to a
    known primal solution; scalar problems also get an iterate plot.
    """
    paths = []
    dists = trace.column("dist")
    if np.all(np.isnan(dists)) and x_true is not None:
        dists = np.array([float(np.linalg.norm(r.x - x_true)) for r in trace.rows])
        label = "||x_n - x*||"
    else:
        label = "dist to saddle set"
    if not np.all(np.isnan(dists)):
        p = os.path.join(outdir, f"{stem}_dist.png")
        fig_curves(p, [(label, dists)], label)
        paths.append(p)
    if trace.rows and trace.rows[0].x.size == 1 and trace.rows[0].y.size == 1:
        xs = np.array([float(r.x[0]) for r in trace.rows])
        ys = np.array([float(r.y[0]) for r in trace.rows])
        p = os.path.join(outdir, f"{stem}_iterates.png")
        fig_curves(p, [("primal", xs), ("dual", ys)], "iterate value", logy=False)
        paths.append(p)
    obj = trace.column("objective")
    if not np.all(np.isnan(obj)):
        p = os.path.join(outdir, f"{stem}_objective.png")
        fig_curves(p, [("objective", obj)], "objective", logy=False)
        paths.append(p)
    return paths


def fig_contour(xs: np.ndarray, ys: np.ndarray, V: np.ndarray, path,
                title: str = ""):
    """Filled contour of a grid scan (V[i, j] at (xs[i], ys[j])); zero level drawn."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5, 4.2))
    cs = ax.contourf(xs, ys, V.T, levels=30)
    fig.colorbar(cs, ax=ax)
    try:
        ax.contour(xs, ys, V.T, levels=[0.0], colors="k", linewidths=0.8)
    except ValueError:
        pass  # constant-sign field has no zero level
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def fig_image_panel(path, panels: Sequence[Tuple[ImageGrid, str]]):
    """Side-by-side grayscale images with titles (original/degraded/restored)."""
    plt = _plt()
    k = len(panels)
    fig, axes = plt.subplots(1, k, figsize=(3.2 * k, 3.4))
    if k == 1:
        axes = [axes]
    for ax, (img, title) in zip(axes, panels):
        ax.imshow(img.to_matrix(), cmap="gray", vmin=0.0, vmax=1.0)
        ax.set_title(title, fontsize=9)
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
