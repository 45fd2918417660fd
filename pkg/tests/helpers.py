#!/usr/bin/env python3
"""
helpers.py

Small meshes and point sets shared by the test modules.

License: GPL-3.0
"""

import os
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from libs.geom_core import WeightedPointSet
from libs.surface_map import UvPatchMesh

SLOW = os.environ.get("DWDT_RUN_SLOW") == "1"


def grid_patch(cells: int = 3, height: Optional[Callable] = None) -> UvPatchMesh:
    """
    A (cells x cells) grid over the unit UV square, two CCW triangles per
    cell, lifted by z = height(u, v) (flat by default).
    """
    ticks = np.linspace(0.0, 1.0, cells + 1)
    uu, vv = np.meshgrid(ticks, ticks, indexing="xy")
    uv = np.column_stack([uu.ravel(), vv.ravel()])
    z = np.zeros(len(uv)) if height is None else height(uv[:, 0], uv[:, 1])
    xyz = np.column_stack([uv, z])
    faces = []
    stride = cells + 1
    for j in range(cells):
        for i in range(cells):
            a = j * stride + i
            b, c, d = a + 1, a + stride, a + stride + 1
            faces += [[a, b, d], [a, d, c]]
    return UvPatchMesh(xyz, uv, np.array(faces))


def random_points(n: int, seed: int, max_weight_sq: float = 0.09) -> WeightedPointSet:
    """Positions uniform in the unit square, squared weights uniform in [0, max_weight_sq]."""
    rng = np.random.default_rng(seed)
    return WeightedPointSet(rng.uniform(0.0, 1.0, size=(n, 2)), np.sqrt(rng.uniform(0.0, max_weight_sq, size=n)))


def write_text(directory, name: str, text: str) -> Path:
    path = Path(directory) / name
    path.write_text(text)
    return path
