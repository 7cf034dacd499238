"""Static SVG plots of a focal curve, its truth and its reconstruction."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .fdcore import FunctionalSample  # noqa: E402


def emit_plot(sample: FunctionalSample, reconstructions, path, truth: FunctionalSample | None = None,
              focal: int | None = None, title: str | None = None) -> None:
    """Write an SVG with observed segments, the true curve and the reconstruction.

    Without a focal curve (and no reconstructions) every curve's observed
    segments are drawn. Output is byte-stable: no timestamps and a fixed
    hash salt for element ids.
    """
    reconstructions = list(reconstructions or [])
    if focal is None and reconstructions:
        focal = reconstructions[0].focal
    t = sample.grid.points
    with plt.rc_context({"svg.hashsalt": "fdrecon", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(8, 4))
        if focal is None:
            for i in range(sample.n):
                ax.plot(t, np.where(sample.mask[i], sample.values[i], np.nan),
                        color="0.6", lw=0.6, marker=".", ms=1.5)
        else:
            if truth is not None:
                ax.plot(t, truth.values[focal], color="tab:red", lw=1.0, label="true curve")
            ax.plot(t, np.where(sample.mask[focal], sample.values[focal], np.nan),
                    color="black", lw=1.2, marker=".", ms=3, label="observed")
            for r in reconstructions:
                if r.focal != focal:
                    continue
                ax.plot(t, r.filled_values, color="tab:blue", lw=1.0, marker=".", ms=3,
                        label="reconstruction")
            ax.legend(loc="best", frameon=False)
        ax.set_xlabel("t")
        ax.set_ylabel("X(t)")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
