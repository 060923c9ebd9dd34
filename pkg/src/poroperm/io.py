"""CSV and VTK writers for simulation artifacts.

Every CSV starts with a comment-line manifest (experiment id, seed, profile,
version) so outputs are self-describing and reruns are byte-comparable.
Field files come in two flavors: a per-vertex CSV and a legacy-ASCII VTK
unstructured grid for visualization tools.
"""

from __future__ import annotations

import csv
import io as _io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .biot import BiotState, FlowDiagnostics, SweepRow
from .mesh import TriMesh
from .percolation import BinStats, ThresholdEstimate, TrialRecord


@dataclass(frozen=True)
class Manifest:
    """Provenance stamp echoed into every output file."""
    experiment: str
    seed: int
    profile: str
    version: str = __version__

    def header_lines(self) -> list[str]:
        return [
            f"# experiment = {self.experiment}",
            f"# seed = {self.seed}",
            f"# profile = {self.profile}",
            f"# version = {self.version}",
        ]


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, columns, rows, manifest: Manifest) -> None:
    """Write rows (iterables matching ``columns``) under the manifest header."""
    buf = _io.StringIO()
    for line in manifest.header_lines():
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


def read_csv(path):
    """Return (manifest dict, column names, rows of strings)."""
    meta = {}
    rows = []
    columns = None
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                meta[key.strip()] = value.strip()
                continue
            record = next(csv.reader([line]))
            if columns is None:
                columns = record
            else:
                rows.append(record)
    return meta, columns or [], rows


def write_records_csv(path, records: list[TrialRecord], topology: str,
                      manifest: Manifest) -> None:
    write_csv(path, ["topology", "stage_fraction", "trial", "f_c", "kappa_n", "seed"],
              ((topology, r.stage_fraction, i, r.f_c, r.kappa_n, r.seed)
               for i, r in enumerate(records)),
              manifest)


def write_bin_stats_csv(path, stats: list[BinStats], topology: str,
                        manifest: Manifest) -> None:
    write_csv(path, ["topology", "center", "count", "mean", "std"],
              ((topology, s.center, s.count, s.mean, s.std) for s in stats),
              manifest)


def write_threshold_csv(path, estimates: dict[str, ThresholdEstimate],
                        manifest: Manifest) -> None:
    write_csv(path, ["topology", "f_c_star", "p_c", "trials"],
              ((name, e.f_c_star, e.p_c, e.trials)
               for name, e in estimates.items()),
              manifest)


def write_curve_csv(path, curve: np.ndarray, relation_name: str,
                    manifest: Manifest) -> None:
    write_csv(path, ["relation", "theta_n", "kappa_n"],
              ((relation_name, t, k) for t, k in curve), manifest)


def write_time_series_csv(path, diag: FlowDiagnostics, manifest: Manifest) -> None:
    write_csv(path, ["t", "Q_out", "min_theta", "min_kappa_n", "max_abs_v"],
              zip(diag.times, diag.q_out, diag.min_theta_n, diag.min_kappa_n,
                  diag.max_abs_v),
              manifest)


def write_sweep_csv(path, rows: list[SweepRow], manifest: Manifest) -> None:
    write_csv(path, ["relation", "p_c", "Q_out_avg", "error"],
              ((r.relation, r.p_c, r.q_out_avg, r.error or "") for r in rows),
              manifest)


def _vertex_fields(mesh: TriMesh, state: BiotState):
    """Per-vertex view of the state; element fields averaged over neighbors."""
    n_v = mesh.n_vertices
    n_u = mesh.n_p2_nodes
    ux = state.u[:n_v]
    uy = state.u[n_u:n_u + n_v]
    counts = np.zeros(n_v)
    theta = np.zeros(n_v)
    kappa = np.zeros(n_v)
    vx = np.zeros(n_v)
    vy = np.zeros(n_v)
    for k in range(3):
        idx = mesh.triangles[:, k]
        np.add.at(counts, idx, 1.0)
        np.add.at(theta, idx, state.theta_field)
        np.add.at(kappa, idx, state.kappa_field)
        np.add.at(vx, idx, state.v_field[:, 0])
        np.add.at(vy, idx, state.v_field[:, 1])
    return ux, uy, theta / counts, kappa / counts, vx / counts, vy / counts


def write_field_csv(path, mesh: TriMesh, state: BiotState,
                    manifest: Manifest) -> None:
    ux, uy, theta, kappa, vx, vy = _vertex_fields(mesh, state)
    write_csv(path, ["x", "y", "ux", "uy", "p", "theta", "kappa", "vx", "vy"],
              ((mesh.vertices[i, 0], mesh.vertices[i, 1], ux[i], uy[i],
                state.p[i], theta[i], kappa[i], vx[i], vy[i])
               for i in range(mesh.n_vertices)),
              manifest)


def write_vtk(path, mesh: TriMesh, state: BiotState, manifest: Manifest) -> None:
    """Legacy-ASCII VTK unstructured grid with point and cell data."""
    out = ["# vtk DataFile Version 2.0",
           f"{manifest.experiment} seed={manifest.seed} "
           f"profile={manifest.profile} version={manifest.version}",
           "ASCII",
           "DATASET UNSTRUCTURED_GRID"]
    n_v, n_t = mesh.n_vertices, mesh.n_triangles
    out.append(f"POINTS {n_v} double")
    out.extend(f"{_fmt(x)} {_fmt(y)} 0.0" for x, y in mesh.vertices)
    out.append(f"CELLS {n_t} {4 * n_t}")
    out.extend(f"3 {a} {b} {c}" for a, b, c in mesh.triangles)
    out.append(f"CELL_TYPES {n_t}")
    out.extend("5" for _ in range(n_t))

    n_u = mesh.n_p2_nodes
    out.append(f"POINT_DATA {n_v}")
    out.append("SCALARS pressure double 1")
    out.append("LOOKUP_TABLE default")
    out.extend(_fmt(v) for v in state.p)
    out.append("VECTORS displacement double")
    out.extend(f"{_fmt(state.u[i])} {_fmt(state.u[n_u + i])} 0.0"
               for i in range(n_v))

    out.append(f"CELL_DATA {n_t}")
    for name, values in (("porosity", state.theta_field),
                         ("permeability", state.kappa_field)):
        out.append(f"SCALARS {name} double 1")
        out.append("LOOKUP_TABLE default")
        out.extend(_fmt(v) for v in values)
    out.append("VECTORS velocity double")
    out.extend(f"{_fmt(vx)} {_fmt(vy)} 0.0" for vx, vy in state.v_field)
    Path(path).write_text("\n".join(out) + "\n")
