"""Schema-checked readers for poroperm CSV files.

This package never recomputes numerics: it only parses the CSV artifacts
the simulation CLI writes. Each file starts with `# key = value` manifest
lines followed by a header row; readers validate the header against the
expected schema and report the offending columns by name.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class SchemaError(ValueError):
    pass


RECORDS_COLUMNS = ["topology", "stage_fraction", "trial", "f_c", "kappa_n", "seed"]
CURVE_COLUMNS = ["relation", "theta_n", "kappa_n"]
SWEEP_COLUMNS = ["relation", "p_c", "Q_out_avg", "error"]
FIELD_COLUMNS = ["x", "y", "ux", "uy", "p", "theta", "kappa", "vx", "vy"]


@dataclass(frozen=True)
class Table:
    path: Path
    manifest: dict[str, str]
    columns: list[str]
    rows: list[list[str]]

    def floats(self, column: str) -> np.ndarray:
        i = self.columns.index(column)
        return np.array([float(r[i]) if r[i] else np.nan for r in self.rows])

    def strings(self, column: str) -> list[str]:
        i = self.columns.index(column)
        return [r[i] for r in self.rows]

    @property
    def footer(self) -> str:
        return "  ".join(f"{k}={v}" for k, v in self.manifest.items())


def read_table(path, expected_columns: list[str]) -> Table:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"input file {path} does not exist")
    manifest: dict[str, str] = {}
    columns: list[str] | None = None
    rows: list[list[str]] = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                manifest[key.strip()] = value.strip()
                continue
            record = next(csv.reader([line]))
            if columns is None:
                columns = record
            else:
                rows.append(record)
    if columns != expected_columns:
        missing = [c for c in expected_columns if c not in (columns or [])]
        extra = [c for c in (columns or []) if c not in expected_columns]
        parts = [f"{path.name}: unexpected schema"]
        if missing:
            parts.append(f"missing columns: {', '.join(missing)}")
        if extra:
            parts.append(f"unexpected columns: {', '.join(extra)}")
        raise SchemaError("; ".join(parts))
    return Table(path, manifest, columns, rows)


def read_records(path) -> Table:
    return read_table(path, RECORDS_COLUMNS)


def read_curve(path) -> Table:
    return read_table(path, CURVE_COLUMNS)


def read_sweep(path) -> Table:
    return read_table(path, SWEEP_COLUMNS)


def read_field(path) -> Table:
    return read_table(path, FIELD_COLUMNS)
