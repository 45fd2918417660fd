#!/usr/bin/env python3
"""
geom_core.py

2D geometric primitives for power diagrams: weighted point sets, power
bisectors, signed distances to bisectors, weighted circumcenters and exact
k-nearest-neighbour tables.

Weights are stored unsquared. The power distance of x to the weighted point
(v, w) is ||x - v||^2 - w^2, so only w^2 enters any formula.

License: GPL-3.0
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from libs.errors import DegeneratePairError, DegenerateTriangleError

logger = logging.getLogger(__name__)

# |det| <= DEGENERACY_FACTOR * diag^2 counts as collinear
DEGENERACY_FACTOR = 1e-10


@dataclass(frozen=True)
class WeightedPointSet:
    """
    Vertex positions V (n x 2) and per-vertex weights W (n,).

    These are the optimization variables. Instances are treated as immutable;
    the optimizer builds a new one after every update.
    """

    positions: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        positions = np.ascontiguousarray(self.positions, dtype=float).reshape(-1, 2)
        weights = np.ascontiguousarray(self.weights, dtype=float).reshape(-1)
        if len(weights) != len(positions):
            raise ValueError(
                f"positions ({len(positions)}) and weights ({len(weights)}) differ in length"
            )
        if not np.all(np.isfinite(positions)) or not np.all(np.isfinite(weights)):
            raise ValueError("positions and weights must be finite")
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_points(cls, points: Sequence[Sequence[float]], weights=None) -> "WeightedPointSet":
        points = np.asarray(points, dtype=float)
        if weights is None:
            weights = np.zeros(len(points))
        return cls(points, np.asarray(weights, dtype=float))

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def scale(self) -> float:
        """Bounding-box diagonal of the positions."""
        return bounding_diagonal(self.positions)

    def check_distinct(self) -> None:
        """Raise DegeneratePairError when two positions coincide exactly."""
        _, counts = np.unique(self.positions, axis=0, return_counts=True)
        if np.any(counts > 1):
            raise DegeneratePairError("two vertices share the same position")

    def with_weights_shifted(self, shift: float) -> "WeightedPointSet":
        """Add `shift` to every squared weight (w^2 -> w^2 + shift)."""
        squared = self.weights ** 2 + shift
        if np.any(squared < 0):
            raise ValueError("shift makes a squared weight negative")
        return WeightedPointSet(self.positions.copy(), np.sqrt(squared))


@dataclass(frozen=True)
class Bisector:
    """Line n.x + offset = 0; the unit normal points toward the v_j side."""

    normal: np.ndarray
    offset: float


@dataclass(frozen=True)
class NeighborTable:
    """Per-vertex k nearest vertex indices, ascending distance, ties by index."""

    indices: np.ndarray
    k: int

    def neighbors(self, vertex: int) -> List[int]:
        return [int(i) for i in self.indices[vertex]]

    def lists(self) -> List[List[int]]:
        return [self.neighbors(i) for i in range(len(self.indices))]

    def __len__(self) -> int:
        return len(self.indices)


def bounding_diagonal(points: np.ndarray) -> float:
    points = np.asarray(points, dtype=float)
    if len(points) == 0:
        return 0.0
    extent = points.max(axis=0) - points.min(axis=0)
    return float(np.hypot(*extent[:2])) if extent.size >= 2 else float(abs(extent[0]))


def degeneracy_tolerance(points: np.ndarray) -> float:
    diag = bounding_diagonal(points)
    return DEGENERACY_FACTOR * max(diag, 1e-300) ** 2


def orient2d(a, b, c) -> float:
    """Twice the signed area of (a, b, c); positive for counter-clockwise."""
    return float((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))


def power_distance(x, v, w) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    return np.sum((x - v) ** 2, axis=-1) - np.asarray(w, dtype=float) ** 2


def power_bisector(vj, wj: float, vk, wk: float) -> Bisector:
    """
    Bisector between the weighted points (vj, wj) and (vk, wk).

    The line solves 2(vk - vj).x = |vk|^2 - |vj|^2 + wj^2 - wk^2. The signed
    distance is positive on the vj side, i.e. where vj has the smaller power.

    Raises:
        DegeneratePairError: vj and vk coincide.
    """
    vj = np.asarray(vj, dtype=float)
    vk = np.asarray(vk, dtype=float)
    diff = vk - vj
    length = float(np.hypot(diff[0], diff[1]))
    if length == 0.0:
        raise DegeneratePairError(f"coincident points {vj.tolist()} and {vk.tolist()}")
    normal = -diff / length
    rhs = float(vk @ vk - vj @ vj + wj * wj - wk * wk)
    return Bisector(normal=normal, offset=rhs / (2.0 * length))


def signed_bisector_distance(x, b: Bisector) -> float:
    return float(np.dot(b.normal, np.asarray(x, dtype=float)) + b.offset)


def bisector_distances(x: np.ndarray, vj: np.ndarray, wj: np.ndarray,
                       vm: np.ndarray, wm: np.ndarray) -> np.ndarray:
    """
    Vectorized signed distances (pi_m(x) - pi_j(x)) / (2 |vm - vj|).

    All arguments broadcast against each other; point arguments carry a
    trailing axis of size 2.
    """
    numerator = (np.sum((x - vm) ** 2, axis=-1) - wm ** 2) - (np.sum((x - vj) ** 2, axis=-1) - wj ** 2)
    length = np.sqrt(np.sum((vm - vj) ** 2, axis=-1))
    return numerator / (2.0 * length)


def circumcenter_system(vj, wj, vk, wk, vl, wl) -> Tuple[np.ndarray, np.ndarray]:
    """Matrix A (..., 2, 2) and right-hand side r (..., 2) with A c = r."""
    vj = np.asarray(vj, dtype=float)
    vk = np.asarray(vk, dtype=float)
    vl = np.asarray(vl, dtype=float)
    wj = np.asarray(wj, dtype=float)
    wk = np.asarray(wk, dtype=float)
    wl = np.asarray(wl, dtype=float)
    a = 2.0 * np.stack([vk - vj, vl - vj], axis=-2)
    sq_j = np.sum(vj * vj, axis=-1) - wj ** 2
    r = np.stack([np.sum(vk * vk, axis=-1) - wk ** 2 - sq_j,
                  np.sum(vl * vl, axis=-1) - wl ** 2 - sq_j], axis=-1)
    return a, r


def solve_2x2(a: np.ndarray, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Cramer's rule for stacked 2x2 systems; returns (solution, determinant)."""
    det = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    safe = np.where(det == 0.0, 1.0, det)
    x = (r[..., 0] * a[..., 1, 1] - a[..., 0, 1] * r[..., 1]) / safe
    y = (a[..., 0, 0] * r[..., 1] - r[..., 0] * a[..., 1, 0]) / safe
    return np.stack([x, y], axis=-1), det


def weighted_circumcenters(vj, wj, vk, wk, vl, wl) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized weighted circumcenters; returns (centers, 2x2 determinants)."""
    a, r = circumcenter_system(vj, wj, vk, wk, vl, wl)
    return solve_2x2(a, r)


def weighted_circumcenter(vj, wj: float, vk, wk: float, vl, wl: float) -> np.ndarray:
    """
    The point with equal power distance to the three weighted vertices.

    Raises:
        DegenerateTriangleError: the three positions are collinear within the
            degeneracy tolerance of their bounding box.
    """
    points = np.array([vj, vk, vl], dtype=float)
    center, det = weighted_circumcenters(points[0], wj, points[1], wk, points[2], wl)
    # det of the 2x2 system is 4x the orientation determinant
    if abs(float(det)) <= 4.0 * degeneracy_tolerance(points):
        logger.debug("rejecting collinear triple %s", points.tolist())
        raise DegenerateTriangleError(
            f"collinear triple {points.tolist()} (determinant {float(det):.3e})", float(det)
        )
    return center


def knn(points, k: int) -> NeighborTable:
    """
    Exact Euclidean k-nearest neighbours with ties broken by lower index.

    Args:
        points: (n, 2) positions, n >= 2.
        k: requested neighbour count; clamped to n - 1.

    Returns:
        NeighborTable whose rows exclude the vertex itself.
    """
    points = np.asarray(points, dtype=float)
    n = len(points)
    if k < 1:
        raise ValueError("k must be at least 1")
    if n < 2:
        raise ValueError("knn needs at least two points")
    kk = min(k, n - 1)
    tree = cKDTree(points)
    # one extra column beyond self + kk so boundary ties can be detected
    query_k = min(n, kk + 2)
    dists, idx = tree.query(points, k=query_k)
    idx = np.atleast_2d(idx)
    dists = np.atleast_2d(dists)

    table = np.empty((n, kk), dtype=np.int64)
    for i in range(n):
        cand = idx[i]
        if query_k < n and dists[i, -1] <= dists[i, kk]:
            # the k-th distance is tied with points past the queried window
            cand = np.asarray(tree.query_ball_point(points[i], dists[i, kk] * (1 + 1e-12) + 1e-300))
        cand = cand[cand != i]
        sq = np.sum((points[cand] - points[i]) ** 2, axis=1)
        order = np.lexsort((cand, sq))
        table[i] = cand[order[:kk]]
    return NeighborTable(indices=table, k=kk)
