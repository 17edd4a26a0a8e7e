"""Figure rendering for run reports.

Produces the stacked field / spectrogram / population view for a finished
run.  matplotlib is imported lazily with the Agg backend so that library
users never pay for it.
"""

from __future__ import annotations

import numpy as np

from .field import SampledField, Spectrogram
from .propagator import TrajectoryRecord


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def render_run_figure(path: str, f: SampledField, spec: Spectrogram | None,
                      tr: TrajectoryRecord, time_unit: str = "ps",
                      title: str | None = None) -> None:
    """Three stacked panels with a shared time axis: field, spectrogram,
    populations."""
    plt = _pyplot()
    scale = 1e-3 if time_unit == "ps" else 1.0
    n_panels = 3 if spec is not None else 2
    fig, axes = plt.subplots(n_panels, 1, figsize=(7, 2.6 * n_panels),
                             sharex=True)
    ax_field = axes[0]
    ax_field.plot(f.times * scale, f.values, lw=0.4, color="tab:blue")
    ax_field.set_ylabel("E (MV/m)")
    if title:
        ax_field.set_title(title)

    if spec is not None:
        ax_spec = axes[1]
        ax_spec.pcolormesh(spec.times * scale, spec.frequencies,
                           spec.intensity, shading="auto", cmap="viridis",
                           rasterized=True)
        ax_spec.set_ylabel(r"frequency (cm$^{-1}$)")

    ax_pop = axes[-1]
    t = tr.times * scale
    ax_pop.plot(t, tr.p_trans, label="trans", color="tab:green")
    ax_pop.plot(t, tr.p_cis, label="cis", color="tab:red")
    ax_pop.plot(t, tr.p_e, label="excited", color="tab:purple")
    ax_pop.set_ylabel("population")
    ax_pop.set_xlabel(f"t ({time_unit})")
    ax_pop.set_ylim(-0.02, 1.02)
    ax_pop.legend(loc="center right", fontsize=8)

    fig.align_ylabels(axes)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_fitness_figure(path: str, trace) -> None:
    """Best/mean fitness per generation."""
    plt = _pyplot()
    trace = np.asarray(trace, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(trace[:, 0], trace[:, 1], label="best", color="tab:red")
    ax.errorbar(trace[:, 0], trace[:, 2], yerr=trace[:, 3], label="mean",
                color="tab:blue", lw=0.8, elinewidth=0.4)
    ax.set_xlabel("generation")
    ax.set_ylabel("fitness")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_convergence_figure(path: str, j_history: np.ndarray) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(np.arange(len(j_history)), j_history, marker=".",
            color="tab:red")
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective J")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
