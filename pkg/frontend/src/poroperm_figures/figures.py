"""Matplotlib renderers for the four figure kinds.

Every figure carries the source file's manifest line as a small footer so
an image can always be traced back to the run that produced it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .readers import Table, read_curve, read_field, read_records, read_sweep

BIN_HALF_WIDTH = 0.05
DEFAULT_STYLE = {"figure.figsize": (6.0, 4.0), "figure.dpi": 120,
                 "axes.grid": True, "grid.alpha": 0.3}


@dataclass(frozen=True)
class FigureSpec:
    """One figure to render: kind, inputs, destination, styling."""
    kind: str                        # histogram | curves | sweep | field
    inputs: tuple[Path, ...]
    output: Path
    style: dict = field(default_factory=lambda: dict(DEFAULT_STYLE))

    def __post_init__(self):
        missing = [str(p) for p in self.inputs if not Path(p).exists()]
        if missing:
            raise FileNotFoundError(f"figure inputs missing: {', '.join(missing)}")


def _finish(fig, tables: list[Table], output) -> Path:
    footer = tables[0].footer if tables else ""
    fig.text(0.01, 0.005, footer, fontsize=6, color="0.4")
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(output, metadata={"Software": "poroperm-figures"})
    plt.close(fig)
    return output


def plot_histogram(records_csv, bin_center: float, output) -> Path:
    """Histogram of f_c restricted to one normalized-permeability bin."""
    table = read_records(records_csv)
    kappa = table.floats("kappa_n")
    f_c = table.floats("f_c")
    sel = (kappa > bin_center - BIN_HALF_WIDTH) & (kappa < bin_center + BIN_HALF_WIDTH)
    values = f_c[sel]

    with plt.rc_context(DEFAULT_STYLE):
        fig, ax = plt.subplots()
        topology = table.strings("topology")[0] if table.rows else "unknown"
        if values.size == 0:
            warnings.warn(f"no records in bin {bin_center}; rendering empty plot")
            ax.text(0.5, 0.5, "empty bin", ha="center", va="center",
                    transform=ax.transAxes)
        else:
            ax.hist(values, bins=25, color="steelblue", edgecolor="white")
            ax.axvline(values.mean(), color="crimson", linestyle="--",
                       label=f"mean = {values.mean():.4f}")
            ax.legend()
        ax.set_xlabel("fraction of closed channels $f_c$")
        ax.set_ylabel("count")
        ax.set_title(f"{topology}: $\\kappa_n \\in$ "
                     f"({bin_center - BIN_HALF_WIDTH:.2f}, "
                     f"{bin_center + BIN_HALF_WIDTH:.2f})")
        return _finish(fig, [table], output)


def plot_relation_curves(curve_csvs, output) -> Path:
    """Overlay of normalized permeability-porosity relation curves."""
    tables = [read_curve(p) for p in curve_csvs]
    with plt.rc_context(DEFAULT_STYLE):
        fig, ax = plt.subplots()
        for table in tables:
            label = table.strings("relation")[0] if table.rows else table.path.stem
            ax.plot(table.floats("theta_n"), table.floats("kappa_n"), label=label)
        ax.set_xlabel(r"normalized porosity $\theta/\theta_0$")
        ax.set_ylabel(r"normalized permeability $\kappa/\kappa_0$")
        ax.set_title("permeability-porosity relations")
        ax.legend()
        return _finish(fig, tables, output)


def plot_threshold_sweep(sweep_csvs, output) -> Path:
    """Mean outflow against percolation threshold, one line per sweep file."""
    tables = [read_sweep(p) for p in sweep_csvs]
    with plt.rc_context(DEFAULT_STYLE):
        fig, ax = plt.subplots()
        for table in tables:
            p_c = table.floats("p_c")
            q = table.floats("Q_out_avg")
            ok = ~np.isnan(p_c) & ~np.isnan(q)
            order = np.argsort(p_c[ok])
            ax.plot(p_c[ok][order], q[ok][order], marker="o",
                    label=table.path.stem)
            baseline = q[np.isnan(p_c)]
            if baseline.size:
                ax.axhline(baseline[0], color="0.5", linestyle=":",
                           label=f"{table.path.stem} baseline")
        ax.axhline(0.0, color="black", linewidth=0.8)
        lo, hi = ax.get_ylim()
        # keep the zero crossing visible even for all-positive data
        ax.set_ylim(min(lo, -0.05 * abs(hi)), hi)
        ax.set_xlabel("percolation threshold $p_c$")
        ax.set_ylabel(r"mean outflow $\bar{Q}_{out}$ (m$^3$/s per unit depth)")
        ax.set_title("outflow vs percolation threshold")
        ax.legend(fontsize=8)
        return _finish(fig, tables, output)


def plot_field_heatmaps(field_csv, output) -> Path:
    """Pressure, porosity and velocity-magnitude maps from one field file."""
    table = read_field(field_csv)
    x = table.floats("x")
    y = table.floats("y")
    panels = [
        ("pressure (Pa)", table.floats("p")),
        (r"porosity $\theta$", table.floats("theta")),
        ("|velocity| (m/s)", np.hypot(table.floats("vx"), table.floats("vy"))),
    ]
    with plt.rc_context(DEFAULT_STYLE):
        fig, axes = plt.subplots(1, 3, figsize=(13.0, 3.4))
        for ax, (title, values) in zip(axes, panels):
            im = ax.tricontourf(x, y, values, levels=30, cmap="viridis")
            fig.colorbar(im, ax=ax)
            ax.set_title(title)
            ax.set_aspect("equal")
        fig.suptitle(Path(field_csv).stem)
        fig.tight_layout()
        return _finish(fig, [table], output)
