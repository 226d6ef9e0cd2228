"""Snapshot and diagnostics file formats.

A snapshot is a one-line text header naming the grid dimensions,
followed by raw little-endian float64 Stokes records in C order
(x1, x2, shell, angle, component). Diagnostics CSVs carry the fixed
header ``step,time,hamiltonian,entropy,free_energy,entropy_rate``.
"""

from __future__ import annotations

import numpy as np

from .coherence import CoherenceField
from .grid import GridConfig, PhaseSpaceGrid, build_grid

_MAGIC = "polrte-snap 1"


def _fmt_floats(values) -> str:
    return ",".join(f"{float(v):.17g}" for v in values)


def write_snapshot(path, field: CoherenceField, step: int = 0) -> None:
    grid = field.grid
    cfg = grid.config
    header = (
        f"{_MAGIC} x_dims={len(cfg.x_points)}"
        f" x_points={','.join(str(n) for n in cfg.x_points)}"
        f" x_extent={_fmt_floats(cfg.x_extent)}"
        f" k_shells={_fmt_floats(cfg.k_shells)}"
        f" k_angles={cfg.k_angles}"
        f" step={step} time={field.time:.17g}\n"
    )
    data = np.ascontiguousarray(field.data, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(data.tobytes())


def read_snapshot(path) -> tuple[dict, CoherenceField]:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").strip()
        blob = fh.read()
    fields = header.split()
    if " ".join(fields[:2]) != _MAGIC:
        raise ValueError(f"not a snapshot file: header {header!r}")
    meta = dict(item.split("=", 1) for item in fields[2:])
    x_points = tuple(int(v) for v in meta["x_points"].split(","))
    x_extent = tuple(float(v) for v in meta["x_extent"].split(","))
    shells = tuple(float(v) for v in meta["k_shells"].split(","))
    grid = build_grid(GridConfig(x_extent, x_points, shells, int(meta["k_angles"])))
    expected = grid.n_points * 4 * 8
    if len(blob) != expected:
        raise ValueError(
            f"snapshot payload has {len(blob)} bytes, expected {expected}"
        )
    data = np.frombuffer(blob, dtype="<f8").reshape(grid.shape + (4,)).copy()
    field = CoherenceField(grid, data, float(meta["time"]))
    meta["step"] = int(meta["step"])
    return meta, field


def write_diagnostics_csv(path, records) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(records[0].CSV_HEADER + "\n")
        for rec in records:
            fh.write(rec.csv_row() + "\n")
