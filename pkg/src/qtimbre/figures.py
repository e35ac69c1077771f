"""Figure rendering for the CLI report path.

Every report command writes its delimited output first and then, unless
figures are disabled, a PNG rendering of the same data: the excited-state
population with its emission resets, the histogram convergence panels, the
sonogram image, and the lag-correlation chart.  The library's CSV exports
stay the canonical machine-readable artifacts; these images are for eyes.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .qjump import AtomParams, EmissionRecord, excited_population
from .stats import HistogramSeries, normalized_density
from .synth import SonogramGrid


def plot_population(record: EmissionRecord, path, max_emissions: int = 12) -> None:
    """Excited-state probability over time, resetting at each emission."""
    params: AtomParams = record.params
    period = 2.0 * math.pi / params.rabi_omega
    times = record.emission_times[:max_emissions]
    t_end = (times[-1] + period) if times else 3.0 * period

    grid = np.linspace(0.0, t_end, 2000)
    pop = np.empty_like(grid)
    boundaries = [0.0] + list(times)
    for i, t in enumerate(grid):
        last = 0.0
        for b in boundaries:
            if b <= t:
                last = b
            else:
                break
        pop[i] = excited_population(params, t - last)

    fig, ax = plt.subplots(figsize=(8, 3))
    ax.plot(grid, pop, lw=1.2)
    for t in times:
        ax.axvline(t, color="crimson", ls="--", lw=0.8, alpha=0.7)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("excited-state probability")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title(f"{params.model.value}: population with emission resets")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_histogram_series(series: HistogramSeries, path, density_fn=None) -> None:
    """One panel per checkpoint, optionally overlaying an analytic density."""
    n = len(series.snapshots)
    if n == 0:
        raise ValueError("series has no snapshots")
    ncols = min(n, 2)
    nrows = (n + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(5 * ncols, 2.8 * nrows), squeeze=False)
    for k, (cp, hist) in enumerate(zip(series.checkpoints, series.snapshots)):
        ax = axes[k // ncols][k % ncols]
        if hist.total > 0:
            dens = normalized_density(hist)
            ax.bar(hist.midpoints, dens, width=hist.widths, color="steelblue",
                   edgecolor="none", alpha=0.8)
        if density_fn is not None:
            xs = np.linspace(hist.edges[0], hist.edges[-1], 400)
            ax.plot(xs, [density_fn(x) for x in xs], color="crimson", lw=1.2)
        ax.set_title(f"{cp} intervals")
        ax.set_xlabel("interval (s)")
        ax.set_ylabel("density (1/s)")
    for k in range(n, nrows * ncols):
        axes[k // ncols][k % ncols].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_sonogram(grid: SonogramGrid, path, fmax: float | None = None) -> None:
    """Time-frequency magnitude image on a dB scale."""
    mags = grid.magnitudes
    if mags.size == 0:
        raise ValueError("sonogram grid is empty")
    db = 20.0 * np.log10(mags + 1e-9)
    keep = len(grid.bin_freqs)
    if fmax is not None:
        keep = max(2, int(np.searchsorted(grid.bin_freqs, fmax, side="right")))
    fig, ax = plt.subplots(figsize=(8, 4))
    im = ax.imshow(
        db[:, :keep].T,
        origin="lower",
        aspect="auto",
        extent=(
            float(grid.frame_times[0]),
            float(grid.frame_times[-1]) if len(grid.frame_times) > 1 else float(grid.frame_times[0]) + 1e-3,
            float(grid.bin_freqs[0]),
            float(grid.bin_freqs[keep - 1]),
        ),
        cmap="magma",
        vmin=db.max() - 80.0,
        vmax=db.max(),
    )
    fig.colorbar(im, ax=ax, label="magnitude (dB)")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("frequency (Hz)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_correlations(reports: dict, path) -> None:
    """Bar chart of lag autocorrelations from an analyze report."""
    lags = sorted(int(k) for k in reports)
    values = []
    for lag in lags:
        entry = reports[lag] if lag in reports else reports[str(lag)]
        values.append(entry.get("coefficient", 0.0) if isinstance(entry, dict) else entry)
    fig, ax = plt.subplots(figsize=(6, 3))
    ax.bar(lags, values, color="steelblue")
    ax.axhline(0.0, color="black", lw=0.8)
    ax.set_xlabel("lag")
    ax.set_ylabel("autocorrelation")
    ax.set_ylim(-1.05, 1.05)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
