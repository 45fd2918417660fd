#!/usr/bin/env python3
"""
field_reader.py

Per-vertex field tables and weighted point files.

Field tables are whitespace-separated text. The first non-comment line is a
header naming the columns: `index` followed by any subset of A, Cx, Cy, Cz,
k1, k2 (a leading `#` on the header is allowed). Each following row holds
one vertex. Direction vectors are renormalized on load.

Point files hold one vertex per row: `x y` or `x y w`.

License: GPL-3.0
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from libs.errors import FieldFormatError, MeshFormatError
from libs.geom_core import WeightedPointSet

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
COLUMNS = ("A", "Cx", "Cy", "Cz", "k1", "k2")
# |C| may deviate this much from 1 before a warning is logged
UNIT_TOLERANCE = 1e-3


@dataclass
class FieldTable:
    """Per-vertex target area, unit directions and principal curvatures."""

    area: Optional[np.ndarray] = None
    direction: Optional[np.ndarray] = None
    k1: Optional[np.ndarray] = None
    k2: Optional[np.ndarray] = None

    @property
    def columns(self) -> List[str]:
        cols = []
        if self.area is not None:
            cols.append("A")
        if self.direction is not None:
            cols += ["Cx", "Cy", "Cz"]
        if self.k1 is not None and self.k2 is not None:
            cols += ["k1", "k2"]
        return cols

    def __len__(self) -> int:
        for values in (self.area, self.direction, self.k1):
            if values is not None:
                return len(values)
        return 0


def _header(tokens: List[str], source: str, line: int) -> List[str]:
    if tokens and tokens[0] == "#":
        tokens = tokens[1:]
    elif tokens and tokens[0].startswith("#"):
        tokens = [tokens[0][1:]] + tokens[1:]
    if not tokens or tokens[0] != "index":
        raise FieldFormatError("header must start with 'index'", source, line)
    cols = tokens[1:]
    unknown = [c for c in cols if c not in COLUMNS]
    if unknown:
        raise FieldFormatError(f"unknown columns {unknown}", source, line)
    if len(set(cols)) != len(cols):
        raise FieldFormatError("duplicate columns", source, line)
    c_cols = {"Cx", "Cy", "Cz"} & set(cols)
    if c_cols and len(c_cols) != 3:
        raise FieldFormatError("direction needs all of Cx, Cy, Cz", source, line)
    if ("k1" in cols) != ("k2" in cols):
        raise FieldFormatError("curvatures need both k1 and k2", source, line)
    return cols


def read_fields(path: PathLike, n_vertices: Optional[int] = None) -> FieldTable:
    """
    Read a field table.

    Args:
        path: the table.
        n_vertices: expected row count; checked when given.

    Raises:
        FieldFormatError: bad header or row, count mismatch, repeated or
            missing indices, zero direction vectors.
    """
    source = str(path)
    cols: Optional[List[str]] = None
    rows = {}
    with open(path) as handle:
        for number, raw in enumerate(handle, start=1):
            tokens = raw.split()
            if not tokens:
                continue
            if cols is None:
                cols = _header(tokens, source, number)
                continue
            if tokens[0].startswith("#"):
                continue
            if len(tokens) != len(cols) + 1:
                raise FieldFormatError(f"expected {len(cols) + 1} values, got {len(tokens)}", source, number)
            try:
                index = int(tokens[0])
                values = [float(t) for t in tokens[1:]]
            except ValueError:
                raise FieldFormatError(f"non-numeric value in {raw.strip()!r}", source, number)
            if index in rows:
                raise FieldFormatError(f"vertex {index} listed twice", source, number)
            if not np.all(np.isfinite(values)):
                raise FieldFormatError("non-finite value", source, number)
            rows[index] = (values, number)
    if cols is None:
        raise FieldFormatError("empty field file", source, 0)
    count = len(rows)
    if n_vertices is not None and count != n_vertices:
        raise FieldFormatError(f"{count} rows for {n_vertices} vertices", source, 0)
    if sorted(rows) != list(range(count)):
        raise FieldFormatError("vertex indices must cover 0..n-1", source, 0)

    table = np.array([rows[i][0] for i in range(count)], dtype=float).reshape(count, len(cols))
    column = {name: table[:, i] for i, name in enumerate(cols)}
    result = FieldTable()
    if "A" in column:
        result.area = column["A"]
    if "Cx" in column:
        c = np.column_stack([column["Cx"], column["Cy"], column["Cz"]])
        norms = np.linalg.norm(c, axis=1)
        zero = np.flatnonzero(norms == 0.0)
        if len(zero):
            raise FieldFormatError(f"zero direction at vertex {int(zero[0])}", source, rows[int(zero[0])][1])
        off = np.count_nonzero(np.abs(norms - 1.0) > UNIT_TOLERANCE)
        if off:
            logger.warning("%s: renormalized %d direction vectors that were not unit length", source, off)
        result.direction = c / norms[:, None]
    if "k1" in column:
        result.k1 = column["k1"]
        result.k2 = column["k2"]
    return result


def write_fields(path: PathLike, table: FieldTable) -> None:
    cols = table.columns
    parts = []
    if table.area is not None:
        parts.append(table.area[:, None])
    if table.direction is not None:
        parts.append(table.direction)
    if "k1" in cols:
        parts += [table.k1[:, None], table.k2[:, None]]
    data = np.hstack(parts) if parts else np.zeros((0, 0))
    lines = ["index " + " ".join(cols)]
    for i, row in enumerate(data):
        lines.append(f"{i} " + " ".join(f"{v:.17g}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_point_set(path: PathLike) -> WeightedPointSet:
    """
    Read `x y [w]` rows; `#` starts a comment.

    Raises:
        MeshFormatError: malformed rows.
    """
    source = str(path)
    points, weights = [], []
    with open(path) as handle:
        for number, raw in enumerate(handle, start=1):
            tokens = raw.split("#", 1)[0].split()
            if not tokens:
                continue
            if len(tokens) not in (2, 3):
                raise MeshFormatError(f"expected 'x y' or 'x y w', got {raw.strip()!r}", source, number)
            try:
                values = [float(t) for t in tokens]
            except ValueError:
                raise MeshFormatError(f"non-numeric value in {raw.strip()!r}", source, number)
            if not np.all(np.isfinite(values)):
                raise MeshFormatError("non-finite value", source, number)
            points.append(values[:2])
            weights.append(values[2] if len(values) == 3 else 0.0)
    if not points:
        raise MeshFormatError("no points", source, 0)
    return WeightedPointSet(np.array(points), np.array(weights))


def write_point_set(path: PathLike, ps: WeightedPointSet) -> None:
    lines = [f"{x:.17g} {y:.17g} {w:.17g}" for (x, y), w in zip(ps.positions, ps.weights)]
    Path(path).write_text("\n".join(lines) + "\n")
