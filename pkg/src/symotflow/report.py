"""Matplotlib figures rendered next to the delimited outputs.

Colors follow the established convention: blue for source samples, orange
for mapped samples, green for the connecting segments.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .autodiff import Tensor
from .flow import FlowModel

SOURCE_COLOR = "tab:blue"
MAPPED_COLOR = "tab:orange"
LINK_COLOR = "tab:green"


def correspondence_figure(model: FlowModel, x, z, path, max_links: int = 200) -> None:
    """Two-panel scatter: forward map of x and backward map of z.

    Every point is drawn; connecting segments are thinned to max_links per
    panel to keep the figure readable.
    """
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    tx = model.forward(Tensor(x)).data
    tz = model.inverse(Tensor(z)).data

    fig, axes = plt.subplots(1, 2, figsize=(10, 5))
    for ax, src, dst, title in (
        (axes[0], x, tx, "forward: x to T(x)"),
        (axes[1], tz, z, "backward: T^{-1}(z) to z"),
    ):
        step = max(1, len(src) // max_links)
        for s, d in zip(src[::step], dst[::step]):
            ax.plot([s[0], d[0]], [s[1], d[1]], color=LINK_COLOR, linewidth=0.4, zorder=1)
        ax.scatter(src[:, 0], src[:, 1], s=4, color=SOURCE_COLOR, zorder=2)
        ax.scatter(dst[:, 0], dst[:, 1], s=4, color=MAPPED_COLOR, zorder=2)
        ax.set_title(title)
        ax.set_aspect("equal", adjustable="datalim")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def sweep_figure(rows, path) -> None:
    """OT cost and MMD distance against beta, log-log, like the ablation plot."""
    betas = [r[0] for r in rows]
    ots = [r[1] for r in rows]
    mmds = [r[2] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.plot(betas, ots, "o-", color="tab:red", label="OT cost")
    ax.plot(betas, mmds, "s-", color="tab:blue", label="MMD distance")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("OT weight")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def trace_figure(trace, path) -> None:
    """Loss components across epochs."""
    epochs = np.arange(len(trace))
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.plot(epochs, [t.total for t in trace], color="tab:green", label="total")
    ax.plot(epochs, [t.mmd_fwd + t.mmd_bwd for t in trace], color="tab:blue", label="MMD terms")
    ax.plot(
        epochs,
        [t.beta * (t.ot_fwd + t.ot_bwd) for t in trace],
        color="tab:red",
        label="weighted OT terms",
    )
    ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
