#!/usr/bin/env python3
"""
wdt_oracle.py

Brute-force weighted Delaunay triangulation used as ground truth for the soft
pipeline. A triple (j, k, l) belongs to the triangulation iff every other
vertex m has strictly larger power at the triple's weighted circumcenter c:

    pi_m(c) > pi_j(c)   for all m not in {j, k, l}

This is O(n^4) and intended for n <= 100.

License: GPL-3.0
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Set, Tuple

import numpy as np

from libs.errors import AmbiguousConfigurationError
from libs.geom_core import (
    WeightedPointSet,
    bounding_diagonal,
    degeneracy_tolerance,
    weighted_circumcenters,
)

logger = logging.getLogger(__name__)

# relative margin (times scale^2) below which membership is ambiguous
AMBIGUITY_FACTOR = 1e-9
_CHUNK = 8192


@dataclass
class DiscreteMesh:
    """
    A hard triangulation, 2D or lifted to 3D.

    Faces are index triples, counter-clockwise in 2D. `used` marks vertices
    that appear in at least one face; it is derived from the faces unless
    given explicitly.
    """

    vertices: np.ndarray
    faces: np.ndarray
    used: Optional[np.ndarray] = field(default=None)

    def __post_init__(self) -> None:
        self.vertices = np.asarray(self.vertices, dtype=float)
        if self.vertices.ndim != 2:
            self.vertices = self.vertices.reshape(-1, 2)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if self.used is None:
            used = np.zeros(len(self.vertices), dtype=bool)
            if len(self.faces):
                used[self.faces.ravel()] = True
            self.used = used
        else:
            self.used = np.asarray(self.used, dtype=bool)

    @property
    def dimension(self) -> int:
        return self.vertices.shape[1]

    def face_set(self) -> Set[Tuple[int, int, int]]:
        """Faces as sorted index tuples, for orientation-free comparison."""
        return {tuple(sorted(int(i) for i in f)) for f in self.faces}

    def edges(self) -> np.ndarray:
        """Unique undirected edges (sorted pairs)."""
        if len(self.faces) == 0:
            return np.zeros((0, 2), dtype=np.int64)
        e = self.faces[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2)
        return np.unique(np.sort(e, axis=1), axis=0)

    def with_vertices(self, vertices: np.ndarray) -> "DiscreteMesh":
        """Same connectivity on new vertex positions (e.g. lifted to 3D)."""
        return DiscreteMesh(np.asarray(vertices, dtype=float), self.faces.copy(), self.used.copy())


def orient_ccw(points: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Swap the last two indices of clockwise faces."""
    faces = np.array(faces, dtype=np.int64).reshape(-1, 3)
    if len(faces) == 0:
        return faces
    a, b, c = points[faces[:, 0]], points[faces[:, 1]], points[faces[:, 2]]
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    flip = cross < 0
    faces[flip] = faces[flip][:, [0, 2, 1]]
    return faces


def _margins(ps: WeightedPointSet, triples: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Power margins for a batch of triples.

    Returns:
        tuple: (margin, argmin vertex, orientation determinant) per triple,
               where margin = min over m of pi_m(c) - pi_j(c) (+inf if n == 3).
    """
    v = ps.positions
    w = ps.weights
    j, k, l = triples[:, 0], triples[:, 1], triples[:, 2]
    centers, det = weighted_circumcenters(v[j], w[j], v[k], w[k], v[l], w[l])
    power_j = np.sum((centers - v[j]) ** 2, axis=1) - w[j] ** 2
    # (t, n) powers of every vertex at every center
    powers = np.sum((centers[:, None, :] - v[None, :, :]) ** 2, axis=2) - (w ** 2)[None, :]
    diff = powers - power_j[:, None]
    rows = np.arange(len(triples))
    for col in range(3):
        diff[rows, triples[:, col]] = np.inf
    arg = np.argmin(diff, axis=1)
    margin = diff[rows, arg]
    return margin, arg, det / 4.0


def power_margin(ps: WeightedPointSet, triple: Iterable[int]) -> Tuple[float, int]:
    """
    Membership margin of one triple: min over other m of pi_m(c) - pi_j(c).

    Returns:
        tuple: (margin, vertex attaining it); (inf, -1) when no other vertex exists.
    """
    t = np.array([sorted(int(i) for i in triple)], dtype=np.int64)
    margin, arg, _ = _margins(ps, t)
    if not np.isfinite(margin[0]):
        return float("inf"), -1
    return float(margin[0]), int(arg[0])


def brute_force_wdt(ps: WeightedPointSet) -> DiscreteMesh:
    """
    Exact weighted Delaunay triangulation by testing every triple.

    Args:
        ps: the weighted point set, n >= 3, in general position.

    Returns:
        DiscreteMesh with faces in canonical sorted-index order, oriented CCW.

    Raises:
        AmbiguousConfigurationError: some triple's margin is within
            1e-9 * scale^2 of zero (power-cocircular configuration).
    """
    n = len(ps)
    if n < 3:
        raise ValueError("brute_force_wdt needs at least three vertices")
    scale = bounding_diagonal(ps.positions)
    tol = AMBIGUITY_FACTOR * scale * scale
    deg_tol = degeneracy_tolerance(ps.positions)

    all_triples = np.array(list(itertools.combinations(range(n), 3)), dtype=np.int64)
    kept = []
    for start in range(0, len(all_triples), _CHUNK):
        triples = all_triples[start:start + _CHUNK]
        margin, arg, orient = _margins(ps, triples)
        valid = np.abs(orient) > deg_tol
        ambiguous = valid & (np.abs(margin) <= tol)
        if np.any(ambiguous):
            idx = int(np.flatnonzero(ambiguous)[0])
            tuple_ = tuple(int(i) for i in triples[idx]) + (int(arg[idx]),)
            logger.error("ambiguous power configuration %s (margin %.3e)", tuple_, margin[idx])
            raise AmbiguousConfigurationError(
                f"vertices {tuple_} are power-cocircular within tolerance (margin {margin[idx]:.3e})",
                tuple_, float(margin[idx]),
            )
        kept.append(triples[valid & (margin > 0)])

    faces = np.concatenate(kept) if kept else np.zeros((0, 3), dtype=np.int64)
    faces = orient_ccw(ps.positions, faces)
    logger.debug("brute force WDT: %d faces over %d vertices", len(faces), n)
    return DiscreteMesh(ps.positions.copy(), faces)


def vertex_is_redundant(ps: WeightedPointSet, j: int) -> bool:
    """True iff vertex j appears in no face of the weighted triangulation."""
    if not 0 <= j < len(ps):
        raise IndexError(f"vertex index {j} out of range")
    mesh = brute_force_wdt(ps)
    return not bool(mesh.used[j])


def empty_circumcircle_ok(points: np.ndarray, face: Iterable[int], tol: float = 0.0) -> bool:
    """
    Classical Delaunay check for one face: no other point strictly inside
    its (unweighted) circumcircle.
    """
    points = np.asarray(points, dtype=float)
    f = [int(i) for i in face]
    a, b, c = points[f[0]], points[f[1]], points[f[2]]
    d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]))
    ux = ((a @ a) * (b[1] - c[1]) + (b @ b) * (c[1] - a[1]) + (c @ c) * (a[1] - b[1])) / d
    uy = ((a @ a) * (c[0] - b[0]) + (b @ b) * (a[0] - c[0]) + (c @ c) * (b[0] - a[0])) / d
    center = np.array([ux, uy])
    radius_sq = float(np.sum((a - center) ** 2))
    others = np.delete(np.arange(len(points)), f)
    if len(others) == 0:
        return True
    dist_sq = np.sum((points[others] - center) ** 2, axis=1)
    return bool(np.all(dist_sq >= radius_sq - tol))
