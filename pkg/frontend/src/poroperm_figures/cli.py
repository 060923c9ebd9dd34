"""Batch figure regeneration: scan an output directory, render every match.

File-name conventions follow the simulation CLI:
records_<topology>.csv, curve_<relation>.csv, sweep*.csv, field_*.csv.
"""

from __future__ import annotations

from pathlib import Path

import click

from .figures import (
    plot_field_heatmaps,
    plot_histogram,
    plot_relation_curves,
    plot_threshold_sweep,
)
from .readers import SchemaError

KINDS = ("histograms", "curves", "sweep", "fields")
HISTOGRAM_CENTERS = (0.1, 0.5, 0.9)


def render_directory(in_dir: Path, out_dir: Path, kinds) -> list[Path]:
    written: list[Path] = []
    if "histograms" in kinds:
        for path in sorted(in_dir.glob("records_*.csv")):
            topology = path.stem.removeprefix("records_")
            for center in HISTOGRAM_CENTERS:
                written.append(plot_histogram(
                    path, center, out_dir / f"hist_{topology}_k{center}.png"))
    if "curves" in kinds:
        curves = sorted(in_dir.glob("curve_*.csv"))
        if curves:
            written.append(plot_relation_curves(
                curves, out_dir / "relation_curves.png"))
    if "sweep" in kinds:
        sweeps = sorted(in_dir.glob("sweep*.csv"))
        if sweeps:
            written.append(plot_threshold_sweep(
                sweeps, out_dir / "threshold_sweep.png"))
    if "fields" in kinds:
        for path in sorted(in_dir.glob("field_*.csv")):
            written.append(plot_field_heatmaps(
                path, out_dir / f"heatmap_{path.stem}.png"))
    return written


@click.command()
@click.option("--in", "in_dir", required=True,
              type=click.Path(exists=True, file_okay=False, path_type=Path),
              help="Directory holding simulation CSV outputs.")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path),
              help="Directory for rendered images.")
@click.option("--kinds", multiple=True, type=click.Choice(KINDS),
              help="Figure kinds to render; default all.")
def main(in_dir: Path, out_dir: Path, kinds):
    """Regenerate figures from simulation CSV outputs."""
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        written = render_directory(in_dir, out_dir, kinds or KINDS)
    except SchemaError as exc:
        raise click.ClickException(str(exc)) from exc
    if not written:
        raise click.ClickException(f"no renderable inputs found in {in_dir}")
    for path in written:
        click.echo(f"wrote {path}")
