"""Readers for the experiment CSV schemas.

Both formats may start with '# ...' metadata lines, which are skipped.
Trajectory files carry columns t, p_1..p_m, z_1..z_m, phi, gamma_t,
max_rel_dp, status; heatmap files carry a header row E,<gamma...> and one
row per elasticity value.
"""

from __future__ import annotations

import csv

import numpy as np


class CsvFormatError(ValueError):
    """Input file does not match the documented schema."""


def _data_lines(path):
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line and not line.startswith("#"):
                yield line


def read_trajectory(path) -> dict:
    """Load one trajectory CSV into {'t', 'phi', 'residual'} arrays."""
    rows = list(csv.reader(_data_lines(path)))
    if not rows:
        raise CsvFormatError(f"{path}: empty file")
    header = rows[0]
    try:
        t_col = header.index("t")
        phi_col = header.index("phi")
        z_cols = [i for i, name in enumerate(header) if name.startswith("z_")]
    except ValueError as exc:
        raise CsvFormatError(f"{path}: missing trajectory columns ({exc})") from None
    if not z_cols:
        raise CsvFormatError(f"{path}: no excess-demand columns")
    t, phi, residual = [], [], []
    for row in rows[1:]:
        if len(row) != len(header):
            raise CsvFormatError(f"{path}: ragged row of width {len(row)}")
        t.append(float(row[t_col]))
        phi.append(float(row[phi_col]))
        residual.append(max(abs(float(row[i])) for i in z_cols))
    if not t:
        raise CsvFormatError(f"{path}: no data rows")
    return {"t": np.array(t), "phi": np.array(phi), "residual": np.array(residual)}


def read_heatmap(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Load a heatmap CSV; returns (elasticities, gammas, matrix)."""
    rows = list(csv.reader(_data_lines(path)))
    if not rows:
        raise CsvFormatError(f"{path}: empty file")
    header = rows[0]
    if not header or header[0] != "E":
        raise CsvFormatError(f"{path}: first header cell must be 'E'")
    gammas = np.array([float(x) for x in header[1:]])
    elasticities, matrix = [], []
    width = len(header)
    for row in rows[1:]:
        if len(row) != width:
            raise CsvFormatError(f"{path}: non-rectangular row of width {len(row)}")
        elasticities.append(float(row[0]))
        matrix.append([float(x) for x in row[1:]])
    return np.array(elasticities), gammas, np.array(matrix)
