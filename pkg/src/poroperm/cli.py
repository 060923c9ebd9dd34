"""Command-line front end for network sweeps and consolidation runs.

Exit codes: 0 success, 2 usage error, 3 configuration/validation error,
4 numerical failure.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, replace
from pathlib import Path

import click
import numpy as np

from .biot import (
    BiotSolver,
    ConfigurationError,
    SolverConfig,
    StepError,
    solve_saddle_point,
    sweep_thresholds,
)
from .config import EXAMPLE_CONFIG, load_config
from .io import (
    Manifest,
    write_bin_stats_csv,
    write_curve_csv,
    write_field_csv,
    write_records_csv,
    write_sweep_csv,
    write_threshold_csv,
    write_time_series_csv,
    write_vtk,
)
from .mesh import MeshParameterError
from .networks import (
    NetworkConstructionError,
    NetworkParameterError,
    build_rectangular,
    build_triangular,
    build_unstructured_triangular,
)
from .percolation import (
    PowerLawFitError,
    ThresholdEstimationError,
    bin_stats,
    estimate_threshold,
    estimate_threshold_fast,
    sweep,
)
from .relations import (
    KozenyCarman,
    NetworkInspired,
    RelationParameterError,
    export_curve,
)

_VALIDATION_ERRORS = (ConfigurationError, MeshParameterError,
                      NetworkParameterError, NetworkConstructionError,
                      RelationParameterError, ValueError)
_NUMERICAL_ERRORS = (StepError, ThresholdEstimationError, PowerLawFitError)


@dataclass(frozen=True)
class Profile:
    name: str
    nx: int
    ny: int
    unstructured_nodes: int
    trials: int
    biot_T: float | None     # None keeps the configured final time


PROFILES = {
    "desk": Profile("desk", 50, 30, 900, 100, 60.0),
    "full": Profile("full", 100, 60, 6921, 500, None),
}


def _guarded(func):
    """Map domain errors onto the documented exit codes."""
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except _NUMERICAL_ERRORS as exc:
            click.echo(f"numerical failure: {exc}", err=True)
            sys.exit(4)
        except _VALIDATION_ERRORS as exc:
            click.echo(f"invalid configuration: {exc}", err=True)
            sys.exit(3)
    wrapper.__name__ = func.__name__
    wrapper.__doc__ = func.__doc__
    return wrapper


def _build_network(topology: str, profile: Profile, seed: int,
                   nx: int | None, ny: int | None, nodes: int | None):
    if topology == "rectangular":
        return build_rectangular(nx or profile.nx, ny or profile.ny, 1.0)
    if topology == "triangular":
        return build_triangular(nx or profile.nx, ny or profile.ny, 1.0)
    return build_unstructured_triangular(nodes or profile.unstructured_nodes,
                                         seed=seed)


@click.group()
@click.option("--seed", type=int, default=0, show_default=True,
              help="Master seed for all random draws.")
@click.option("--profile", type=click.Choice(["desk", "full"]), default="desk",
              show_default=True, help="Problem size preset.")
@click.option("--out", type=click.Path(file_okay=False), default="out",
              show_default=True, help="Output directory.")
@click.pass_context
def main(ctx, seed, profile, out):
    """Pore-network percolation and poroelastic consolidation experiments."""
    ctx.ensure_object(dict)
    ctx.obj["seed"] = seed
    ctx.obj["profile"] = PROFILES[profile]
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ctx.obj["out"] = out_dir


def _manifest(ctx, experiment: str) -> Manifest:
    return Manifest(experiment, ctx.obj["seed"], ctx.obj["profile"].name)


@main.command("network-sweep")
@click.option("--topology", required=True,
              type=click.Choice(["rectangular", "triangular", "unstructured"]))
@click.option("--nx", type=int, default=None, help="Grid columns override.")
@click.option("--ny", type=int, default=None, help="Grid rows override.")
@click.option("--nodes", type=int, default=None,
              help="Node-count override for the unstructured topology.")
@click.option("--trials", type=int, default=None, help="Trials override.")
@click.pass_context
@_guarded
def network_sweep(ctx, topology, nx, ny, nodes, trials):
    """Monte-Carlo closure sweep: trial records, bin statistics, threshold."""
    profile = ctx.obj["profile"]
    seed = ctx.obj["seed"]
    net = _build_network(topology, profile, seed, nx, ny, nodes)
    records = sweep(net, trials_per_stage=trials or profile.trials,
                    master_seed=seed)
    manifest = _manifest(ctx, f"network-sweep-{topology}")
    out = ctx.obj["out"]
    write_records_csv(out / f"records_{topology}.csv", records, topology, manifest)
    write_bin_stats_csv(out / f"bin_stats_{topology}.csv", bin_stats(records),
                        topology, manifest)
    est = estimate_threshold(records)
    write_threshold_csv(out / f"threshold_{topology}.csv", {topology: est}, manifest)
    click.echo(f"{topology}: f_c* = {est.f_c_star:.4f}, p_c = {est.p_c:.4f} "
               f"({est.trials} trials)")


@main.command("threshold-estimate")
@click.option("--topology", required=True,
              type=click.Choice(["rectangular", "triangular", "unstructured"]))
@click.option("--nx", type=int, default=None)
@click.option("--ny", type=int, default=None)
@click.option("--nodes", type=int, default=None)
@click.option("--trials", type=int, default=None)
@click.pass_context
@_guarded
def threshold_estimate(ctx, topology, nx, ny, nodes, trials):
    """Connectivity-only threshold estimate (no flow solves)."""
    profile = ctx.obj["profile"]
    seed = ctx.obj["seed"]
    net = _build_network(topology, profile, seed, nx, ny, nodes)
    est = estimate_threshold_fast(net, trials=trials or profile.trials,
                                  master_seed=seed)
    manifest = _manifest(ctx, f"threshold-estimate-{topology}")
    write_threshold_csv(ctx.obj["out"] / f"threshold_{topology}.csv",
                        {topology: est}, manifest)
    click.echo(f"{topology}: p_c = {est.p_c:.4f} ({est.trials} trials)")


@main.command("relation-curve")
@click.option("--relation", "kind", required=True,
              type=click.Choice(["kozeny-carman", "network-inspired"]))
@click.option("--p-c", type=float, default=None,
              help="Percolation threshold (network-inspired only).")
@click.option("--theta0", type=float, default=0.4, show_default=True)
@click.option("--d-s", type=float, default=0.2e-3, show_default=True)
@click.option("--points", type=int, default=200, show_default=True)
@click.pass_context
@_guarded
def relation_curve(ctx, kind, p_c, theta0, d_s, points):
    """Normalized permeability-porosity curve samples."""
    if kind == "network-inspired":
        if p_c is None:
            raise click.UsageError("--p-c is required for network-inspired")
        rel = NetworkInspired(p_c=p_c, theta0=theta0, d_s=d_s)
        name = f"network-inspired-{p_c}"
    else:
        rel = KozenyCarman(d_s=d_s, theta0=theta0)
        name = "kozeny-carman"
    grid = np.linspace(theta0 / points, theta0, points)
    curve = export_curve(rel, grid)
    manifest = _manifest(ctx, f"relation-curve-{name}")
    write_curve_csv(ctx.obj["out"] / f"curve_{name}.csv", curve, name, manifest)
    click.echo(f"wrote {points} samples for {name}")


def _apply_profile(cfg: SolverConfig, profile: Profile) -> SolverConfig:
    if profile.biot_T is not None and cfg.T > profile.biot_T:
        cfg = replace(cfg, T=profile.biot_T)
    return cfg


@main.command("biot-run")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--snapshots", default="", help="Comma-separated snapshot times.")
@click.pass_context
@_guarded
def biot_run(ctx, config_path, snapshots):
    """One coupled consolidation run: time series plus field snapshots."""
    cfg = _apply_profile(load_config(config_path), ctx.obj["profile"])
    times = [float(t) for t in snapshots.split(",") if t.strip()]
    solver = BiotSolver(cfg)
    result = solver.run(snapshot_times=times)
    manifest = _manifest(ctx, f"biot-run-{cfg.problem_kind}-{cfg.relation.name}")
    out = ctx.obj["out"]
    write_time_series_csv(out / "time_series.csv", result.diagnostics, manifest)
    for state in result.snapshots + (result.final_state,):
        stem = f"field_t{state.t:g}"
        write_field_csv(out / f"{stem}.csv", solver.mesh, state, manifest)
        write_vtk(out / f"{stem}.vtk", solver.mesh, state, manifest)
    click.echo(f"Q_out average = {result.diagnostics.q_out_avg:.6e} m^3/s")


@main.command("threshold-sweep")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--grid", default="0:0.975:40", show_default=True,
              help="Threshold grid as start:stop:count or comma list.")
@click.pass_context
@_guarded
def threshold_sweep(ctx, config_path, grid):
    """Time-averaged outflow versus percolation threshold."""
    cfg = _apply_profile(load_config(config_path), ctx.obj["profile"])
    if ":" in grid:
        parts = grid.split(":")
        if len(parts) != 3:
            raise click.UsageError("grid must be start:stop:count")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        values = np.linspace(start, stop, count)
    else:
        values = np.array([float(v) for v in grid.split(",") if v.strip()])
    if values.size == 0:
        raise click.UsageError("empty threshold grid")
    rows = sweep_thresholds(cfg, values)
    manifest = _manifest(ctx, f"threshold-sweep-{cfg.problem_kind}")
    write_sweep_csv(ctx.obj["out"] / "sweep.csv", rows, manifest)
    failures = [r for r in rows if r.error]
    click.echo(f"{len(rows)} rows, {len(failures)} failed runs")


@main.command("saddle-check")
@click.pass_context
@_guarded
def saddle_check(ctx):
    """Verify convergence to the zero-permeability saddle-point limit."""
    from .relations import PermeabilityRelation

    class _Constant(PermeabilityRelation):
        def __init__(self, value, theta0=0.4):
            self.value = value
            self.theta0 = theta0

        def transform(self, X):
            return np.full(np.shape(X), self.value)

        @property
        def kappa0(self):
            return self.value

    kappa0 = KozenyCarman().kappa0
    cfg = SolverConfig(relation=_Constant(kappa0), dx=0.2, dy=0.2,
                       T=0.5, tau=0.5, stabilization=False)
    solver = BiotSolver(cfg)
    u0, p0 = solve_saddle_point(solver.sys, cfg)
    rows = []
    for factor in (1e-2, 1e-4, 1e-6):
        scaled = replace(cfg, relation=_Constant(kappa0 * factor))
        s = BiotSolver(scaled, sys=solver.sys)
        st = s.step(s.initial_state())
        du = st.u - u0
        err_u = float(np.sqrt(du @ (solver.sys.A @ du)))
        err_p = float(np.linalg.norm(st.p - p0))
        rows.append((factor, err_u, err_p))
        click.echo(f"tau*kappa scale {factor:.0e}: |u - u0|_A = {err_u:.3e}, "
                   f"|p - p0| = {err_p:.3e}")
    manifest = _manifest(ctx, "saddle-check")
    from .io import write_csv
    write_csv(ctx.obj["out"] / "saddle.csv", ["factor", "err_u", "err_p"],
              rows, manifest)
    ok = (rows[0][1] > rows[1][1] > rows[2][1]
          and rows[0][2] > rows[1][2] > rows[2][2]
          and rows[2][1] <= 1e-3 * rows[0][1]
          and rows[2][2] <= 1e-3 * rows[0][2])
    if not ok:
        raise StepError("saddle-point convergence ladder is not monotone")
    click.echo("saddle-point limit confirmed")


@main.command("example-config")
@click.pass_context
def example_config(ctx):
    """Write an annotated example configuration file."""
    path = ctx.obj["out"] / "example.ini"
    path.write_text(EXAMPLE_CONFIG)
    click.echo(str(path))


if __name__ == "__main__":
    main()
