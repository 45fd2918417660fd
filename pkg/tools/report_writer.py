#!/usr/bin/env python3
"""
report_writer.py

Plain-text outputs of a run: `key = value` reports, aligned text tables for
the console and the per-iteration loss CSV.

License: GPL-3.0
"""

import csv
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Union

from libs.config_manager import format_config

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def write_report(path: PathLike, values: Mapping[str, Any]) -> None:
    """Write a key = value report (floats with 17 significant digits)."""
    Path(path).write_text(format_config(dict(values)))
    logger.debug("wrote report %s", path)


def format_table(values: Mapping[str, Any], title: str = "") -> str:
    """Two-column text table for console output."""
    rows = []
    for key, value in values.items():
        if isinstance(value, float):
            text = f"{value:.6g}"
        elif value is None:
            text = "n/a"
        else:
            text = str(value)
        rows.append((key, text))
    width = max((len(k) for k, _ in rows), default=0)
    lines = [title, "-" * max(len(title), width + 12)] if title else []
    lines += [f"{k.ljust(width)}  {v}" for k, v in rows]
    return "\n".join(lines)


def format_side_by_side(columns: Mapping[str, Mapping[str, Any]]) -> str:
    """Several reports as columns sharing their keys (e.g. Adam vs annealing)."""
    names = list(columns)
    keys: List[str] = []
    for report in columns.values():
        keys += [k for k in report if k not in keys]
    width = max((len(k) for k in keys), default=0)
    header = " " * width + "  " + "  ".join(n.rjust(14) for n in names)
    lines = [header]
    for key in keys:
        cells = []
        for name in names:
            value = columns[name].get(key)
            cells.append((f"{value:.6g}" if isinstance(value, float) else str(value)).rjust(14))
        lines.append(key.ljust(width) + "  " + "  ".join(cells))
    return "\n".join(lines)


def write_loss_csv(path: PathLike, rows: Iterable[Dict[str, Any]]) -> None:
    """One row per iteration; the columns are taken from the first row."""
    rows = list(rows)
    with open(path, "w", newline="") as handle:
        if not rows:
            return
        writer = csv.DictWriter(handle, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in row.items()})
    logger.debug("wrote %d loss rows to %s", len(rows), path)
