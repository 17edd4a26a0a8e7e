"""Three stacked panels: field trace, spectrogram, population evolution."""

from __future__ import annotations

import numpy as np

from .bundle import FigureBundle


def _time_scale(style: dict, duration_fs: float):
    unit = style["time_unit"]
    if unit == "auto":
        unit = "ps" if duration_fs >= 2000.0 else "fs"
    return (1e-3, "ps") if unit == "ps" else (1.0, "fs")


def _spectrogram_grid(table):
    """Long-format (t, freq, intensity) rows -> mesh axes and image."""
    times = np.unique(table["t_fs"])
    freqs = np.unique(table["freq_cm"])
    img = np.full((len(freqs), len(times)), np.nan)
    ti = np.searchsorted(times, table["t_fs"])
    fi = np.searchsorted(freqs, table["freq_cm"])
    img[fi, ti] = table["intensity"]
    return times, freqs, img


def render_three_panel(bundle: FigureBundle) -> str:
    """Render the figure and return the output path."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    style = bundle.resolved_style()
    tables = bundle.load()
    traj = tables["trajectory"]
    fld = tables["field"]

    scale, unit = _time_scale(style, float(traj["t_fs"][-1] - traj["t_fs"][0]))
    fig, axes = plt.subplots(3, 1, figsize=style["figsize"], sharex=True,
                             constrained_layout=True)

    ax = axes[0]
    ax.plot(fld["t_fs"] * scale, fld["E_MV_per_m"], lw=0.5, color="tab:blue")
    ax.set_ylabel("E (MV/m)")

    ax = axes[1]
    if "spectrogram" in tables:
        times, freqs, img = _spectrogram_grid(tables["spectrogram"])
        if style["freq_range"] is not None:
            lo, hi = style["freq_range"]
            keep = (freqs >= lo) & (freqs <= hi)
            freqs, img = freqs[keep], img[keep]
        mesh = ax.pcolormesh(times * scale, freqs, img, cmap=style["cmap"],
                             shading="nearest", rasterized=True)
        fig.colorbar(mesh, ax=ax, label="intensity")
        ax.set_ylabel(r"frequency (cm$^{-1}$)")
    else:
        ax.set_axis_off()
        ax.text(0.5, 0.5, "no spectrogram for this run",
                ha="center", va="center", transform=ax.transAxes)

    ax = axes[2]
    t = traj["t_fs"] * scale
    ax.plot(t, traj["P_trans"], label="trans", color="tab:green")
    ax.plot(t, traj["P_cis"], label="cis", color="tab:red")
    ax.plot(t, traj["P_e"], label="excited", color="tab:purple")
    ax.set_ylabel("population")
    ax.set_xlabel(f"time ({unit})")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="center right", frameon=False)

    fig.savefig(bundle.output, dpi=style["dpi"],
                metadata={"Software": "plotkit"})
    plt.close(fig)
    return bundle.output
