"""Figure rendering for the command-line report path.

Only the evaluation report draws anything; everything else in the package
emits tables.  Import of matplotlib is deferred so library users who never
render pay nothing for it, and the Agg backend is forced because the CLI
runs headless.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

_DPI = 150


def render_error_heatmap(err: np.ndarray, labels: tuple[str, ...], path: str,
                         title: str = "elementwise absolute error") -> None:
    """Render an n x n nonnegative error matrix as a PNG heatmap.

    Color is log-scaled when the matrix has any positive entry (zeros are
    clipped to the smallest positive value so they draw at the bottom of
    the scale).  Output bytes depend only on the inputs, so repeated runs
    of the same evaluation produce identical files.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.colors import LogNorm

    err = np.asarray(err, dtype=float)
    if err.ndim != 2 or err.shape[0] != err.shape[1]:
        raise ValidationError(f"error matrix must be square, got {err.shape}")
    if err.shape[0] != len(labels):
        raise ValidationError(f"{len(labels)} labels for a {err.shape[0]}-row matrix")
    if err.min() < 0:
        raise ValidationError("error matrix has negative entries")

    n = err.shape[0]
    positive = err[err > 0]
    fig, ax = plt.subplots(figsize=(6.4, 5.4))
    if positive.size:
        lo = float(positive.min())
        hi = float(positive.max())
        if lo == hi:
            lo = hi / 10.0
        shown = np.maximum(err, lo)
        image = ax.imshow(shown, norm=LogNorm(vmin=lo, vmax=hi), cmap="viridis")
    else:
        image = ax.imshow(err, vmin=0.0, vmax=1.0, cmap="viridis")
    ax.set_title(title)
    ax.set_xticks(range(n))
    ax.set_yticks(range(n))
    ax.set_xticklabels(labels, rotation=90, fontsize=7)
    ax.set_yticklabels(labels, fontsize=7)
    fig.colorbar(image, ax=ax, fraction=0.046, pad=0.04)
    fig.tight_layout()
    # fixed metadata keeps the PNG byte-identical across reruns
    fig.savefig(path, dpi=_DPI, metadata={"Software": "gridid"})
    plt.close(fig)
