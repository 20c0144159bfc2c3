"""Report figures written next to the CSV outputs.

Uses the object-oriented Agg API directly so nothing touches pyplot's global
state, and strips the PNG ``Software`` tag so files are byte-reproducible.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from spca.solver import IterateRecord

PALETTE = ("tab:blue", "tab:red", "tab:green", "tab:orange", "tab:purple",
           "tab:brown", "tab:pink", "tab:gray", "tab:olive", "tab:cyan")
DPI = 120


def _save(fig: Figure, path) -> None:
    FigureCanvasAgg(fig)
    fig.savefig(path, dpi=DPI, metadata={"Software": None})


def _colors(labels) -> list[str]:
    return [PALETTE[int(lab) % len(PALETTE)] for lab in np.asarray(labels)]


def plot_convergence(trace: Sequence[IterateRecord], path) -> None:
    """Iterate gaps in U and V and the objective against iteration."""
    recs = [r for r in trace if r.k > 0]
    k = np.array([r.k for r in recs])
    fig = Figure(figsize=(11, 3.2))
    axes = fig.subplots(1, 3)
    for ax, vals, label in (
        (axes[0], [r.du for r in recs], r"$\|U(k)-U(k-1)\|_F$"),
        (axes[1], [r.dv for r in recs], r"$\|V(k)-V(k-1)\|_F$"),
    ):
        vals = np.asarray(vals)
        pos = vals > 0
        ax.semilogy(k[pos], vals[pos], lw=1.2)
        ax.set_xlabel("iteration")
        ax.set_title(label)
        ax.grid(True, which="both", alpha=0.3)
    f = np.array([trace[0].f] + [r.f for r in recs])
    axes[2].plot(np.arange(len(f)), f, lw=1.2, color="k")
    axes[2].set_xlabel("iteration")
    axes[2].set_title("objective")
    axes[2].grid(True, alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def plot_points3d(x: np.ndarray, labels, path, title: str = "") -> None:
    x = np.asarray(x)
    fig = Figure(figsize=(4.5, 4.5))
    ax = fig.add_subplot(projection="3d")
    ax.scatter(x[0], x[1], x[2], c=_colors(labels), s=8, depthshade=False)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_zlabel("z")
    ax.view_init(elev=20, azim=45)
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_components(v: np.ndarray, labels, path, title: str = "") -> None:
    """Scatter of the first two rows of V over the unit circle."""
    v = np.asarray(v)
    fig = Figure(figsize=(4.5, 4.5))
    ax = fig.add_subplot()
    t = np.linspace(0, 2 * np.pi, 361)
    ax.plot(np.cos(t), np.sin(t), color="0.8", lw=0.8, zorder=0)
    second = v[1] if v.shape[0] > 1 else np.zeros(v.shape[1])
    ax.scatter(v[0], second, c=_colors(labels), s=10)
    ax.set_aspect("equal")
    ax.set_xlim(-1.1, 1.1)
    ax.set_ylim(-1.1, 1.1)
    ax.set_xlabel("component 1")
    ax.set_ylabel("component 2")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)
