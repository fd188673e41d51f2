"""Figure rendering for the CLI report path.

Every job that emits delimited data also renders a matplotlib figure next
to it.  Figures are a convenience view; the CSV/JSON artifacts remain the
machine-readable contract.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE_OPTS = {"dpi": 150, "bbox_inches": "tight"}


def save_band_figure(grid, path, max_bands: int = 4):
    """Heatmaps of the lowest bands over the cell parameterization."""
    nb = min(grid.band_count, max_bands)
    fig, axes = plt.subplots(1, nb, figsize=(3.6 * nb, 3.2), squeeze=False)
    for b in range(nb):
        ax = axes[0, b]
        im = ax.imshow(
            grid.values[:, :, b].T, origin="lower", aspect="auto",
            extent=[0, 1, 0, 1], cmap="viridis",
        )
        ax.set_title(f"band {b + 1}")
        ax.set_xlabel("t1")
        if b == 0:
            ax.set_ylabel("t2")
        fig.colorbar(im, ax=ax, shrink=0.85)
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def save_extremum_figure(grid, report, path):
    """Band heatmap with the located extremal points and near-level nodes."""
    band = grid.values[:, :, report.band - 1]
    n1, n2 = grid.shape
    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    im = ax.imshow(
        band.T, origin="lower", aspect="auto", extent=[0, 1, 0, 1],
        cmap="viridis",
    )
    fig.colorbar(im, ax=ax, label=f"band {report.band}")
    for cluster in report.clusters:
        ii = np.array([n[0] for n in cluster.nodes]) / n1
        jj = np.array([n[1] for n in cluster.nodes]) / n2
        ax.plot(ii, jj, ".", color="crimson", ms=2.5)
    basis = np.column_stack([grid.edge1, grid.edge2])
    for p in report.points:
        t = np.linalg.solve(basis, p) % 1.0
        ax.plot(t[0], t[1], "w*", ms=12, mec="black")
    ax.set_title(
        f"band {report.band} {report.kind}: {report.value:.6g} "
        f"[{report.classification}]"
    )
    ax.set_xlabel("t1")
    ax.set_ylabel("t2")
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def save_discriminant_figure(scan, path):
    """|Delta| and the minimal pair distance along the k2 sweep."""
    k2 = np.array([e.k2 for e in scan.entries])
    absd = np.array([e.abs_delta for e in scan.entries])
    pair = np.array([e.min_pair for e in scan.entries])
    flags = np.array([e.flag for e in scan.entries])
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.0, 5.2), sharex=True)
    ax1.semilogy(k2, np.maximum(absd, 1e-300), ".-", lw=0.9)
    ax1.set_ylabel("|discriminant|")
    ax2.semilogy(k2, np.maximum(pair, 1e-300), ".-", color="darkorange", lw=0.9)
    ax2.set_ylabel("min pair distance")
    ax2.set_xlabel("k2")
    for ax in (ax1, ax2):
        for x in k2[flags]:
            ax.axvline(x, color="crimson", alpha=0.4, lw=1.0)
    ax1.set_title(f"degeneracy scan at lambda = {scan.lam.real:.6g}")
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def save_t1_figure(entries, path):
    """Companion eigenvalues in the complex k1-plane, colored by k2."""
    fig, ax = plt.subplots(figsize=(6.0, 4.6))
    k2s = [k2 for k2, _ in entries]
    lo, hi = min(k2s), max(k2s)
    cmap = plt.get_cmap("plasma")
    for k2, vals in entries:
        c = cmap(0.5 if hi == lo else (k2 - lo) / (hi - lo))
        ax.plot(vals.real, vals.imag, ".", color=c, ms=3.5)
    sm = plt.cm.ScalarMappable(cmap=cmap, norm=plt.Normalize(lo, hi))
    fig.colorbar(sm, ax=ax, label="k2")
    ax.set_xlabel("Re k1")
    ax.set_ylabel("Im k1")
    ax.set_title("linearized-pencil spectrum")
    ax.grid(alpha=0.3)
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def save_surface_figure(grid, path):
    """Two-band surface plot over the sheared cell (tight-binding view)."""
    n1, n2 = grid.shape
    kx = np.empty((n1 + 1, n2 + 1))
    ky = np.empty((n1 + 1, n2 + 1))
    for i in range(n1 + 1):
        for j in range(n2 + 1):
            k = (i / n1) * grid.edge1 + (j / n2) * grid.edge2
            kx[i, j], ky[i, j] = k
    fig = plt.figure(figsize=(6.4, 5.0))
    ax = fig.add_subplot(111, projection="3d")
    for b, cmap in ((0, "viridis"), (1, "plasma")):
        vals = grid.values[:, :, b]
        closed = np.pad(vals, ((0, 1), (0, 1)), mode="wrap")
        ax.plot_surface(kx, ky, closed, cmap=cmap, alpha=0.85,
                        linewidth=0, antialiased=True)
    ax.set_xlabel("k1")
    ax.set_ylabel("k2")
    ax.set_zlabel("band value")
    ax.set_title("band surfaces")
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def save_levelset_figure(grid, clusters, lambda_star, path):
    """Level-set nodes in actual k coordinates, one color per cluster."""
    fig, ax = plt.subplots(figsize=(5.6, 4.8))
    cmap = plt.get_cmap("tab10")
    for idx, cluster in enumerate(clusters):
        pts = np.array([grid.kvec(*n) for n in cluster.nodes])
        ax.plot(pts[:, 0], pts[:, 1], ".", ms=3,
                color=cmap(idx % 10),
                label=f"cluster {idx}: diam {cluster.diameter:.3g}")
    ax.set_xlabel("k1")
    ax.set_ylabel("k2")
    ax.set_title(f"level set at {lambda_star:.6g}")
    if clusters:
        ax.legend(fontsize=7, loc="upper right")
    ax.set_aspect("equal", adjustable="datalim")
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)
