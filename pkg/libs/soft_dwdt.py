#!/usr/bin/env python3
"""
soft_dwdt.py

Soft weighted Delaunay triangulation: candidate triangles from mutual
k-nearest neighbours, signed distances from each weighted circumcenter to the
reduced power cells of its corners, sigmoid inclusion scores and thresholded
extraction of a discrete mesh.

A candidate (j, k, l) with weighted circumcenter c belongs to the weighted
Delaunay triangulation iff c lies inside the power cell of j computed while
ignoring k and l (the reduced cell). The corner score is sigma(alpha * d),
where d is the smallest signed bisector distance from c to the corner's
competitors. Since c has equal power to all three corners, the three corner
scores cross 0.5 together.

License: GPL-3.0
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Tuple

import numpy as np
from scipy import sparse

from libs.geom_core import (
    NeighborTable,
    WeightedPointSet,
    bisector_distances,
    degeneracy_tolerance,
    knn,
    weighted_circumcenter,
    weighted_circumcenters,
)
from libs.gradient_engine import (
    Node,
    Tape,
    bisector_distance_op,
    sigmoid_op,
    stack_columns,
    take,
    weighted_circumcenter_op,
    weighted_sum,
)
from libs.wdt_oracle import DiscreteMesh, orient_ccw, power_margin

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 1000.0
DEFAULT_K = 80
DEFAULT_THRESHOLD = 0.5
# distance reported for a corner with no competing vertex
SENTINEL_DISTANCE = 1e6
_CHUNK = 4096


@dataclass(frozen=True)
class CandidateTriangle:
    """Index triple j < k < l with the exclusion list of each corner."""

    indices: Tuple[int, int, int]
    exclusions: Tuple[Tuple[int, ...], Tuple[int, ...], Tuple[int, ...]]

    def exclusion_for(self, corner: int) -> Tuple[int, ...]:
        if corner not in self.indices:
            raise ValueError(f"vertex {corner} is not a corner of {self.indices}")
        return self.exclusions[self.indices.index(corner)]


@dataclass
class CandidateSet:
    """
    All candidate triples of one evaluation, sorted by (j, k, l).

    The exclusion list of corner a in a triangle is row a of the neighbour
    table with the other two corners removed.
    """

    triples: np.ndarray
    neighbors: NeighborTable
    dropped_degenerate: int = 0

    def __len__(self) -> int:
        return len(self.triples)

    def __iter__(self) -> Iterator[CandidateTriangle]:
        for i in range(len(self.triples)):
            yield self[i]

    def __getitem__(self, i: int) -> CandidateTriangle:
        t = tuple(int(x) for x in self.triples[i])
        exclusions = []
        for slot in range(3):
            others = {t[(slot + 1) % 3], t[(slot + 2) % 3]}
            exclusions.append(tuple(m for m in self.neighbors.neighbors(t[slot]) if m not in others))
        return CandidateTriangle(indices=t, exclusions=tuple(exclusions))


@dataclass
class SoftTriangulation:
    """
    Candidates with per-corner scores s_{i|j} and averaged scores s_i.

    `opponents` holds, per corner, the competitor whose bisector attains the
    minimum distance (-1 when the exclusion list is empty). This is the branch
    frozen when gradients are taken.
    """

    points: WeightedPointSet
    candidates: CandidateSet
    alpha: float
    centers: np.ndarray
    distances: np.ndarray
    opponents: np.ndarray
    corner_scores: np.ndarray
    scores: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.scores = self.corner_scores.mean(axis=1) if len(self.corner_scores) else np.zeros(0)

    @property
    def triples(self) -> np.ndarray:
        return self.candidates.triples

    def __len__(self) -> int:
        return len(self.candidates)


def _mutual_adjacency(nt: NeighborTable) -> sparse.csr_matrix:
    n = len(nt)
    rows = np.repeat(np.arange(n), nt.k)
    cols = nt.indices.ravel()
    adj = sparse.csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))
    return adj.multiply(adj.T).tocsr()


def enumerate_candidates(ps: WeightedPointSet, nt: NeighborTable) -> CandidateSet:
    """
    Every triple whose vertices are pairwise in each other's kNN lists.

    Collinear triples (within the degeneracy tolerance) are dropped and counted.

    Args:
        ps: the point set the table was built from.
        nt: neighbour table.

    Returns:
        CandidateSet sorted by (j, k, l).
    """
    n = len(ps)
    if len(nt) != n:
        raise ValueError("neighbour table does not match the point set")
    mutual = _mutual_adjacency(nt)
    chunks: List[np.ndarray] = []
    for j in range(n):
        row = mutual.indices[mutual.indptr[j]:mutual.indptr[j + 1]]
        row = np.sort(row[row > j])
        if len(row) < 2:
            continue
        sub = sparse.triu(mutual[row][:, row], k=1).tocoo()
        if sub.nnz == 0:
            continue
        a, b = row[sub.row], row[sub.col]
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        chunks.append(np.column_stack([np.full(len(lo), j), lo, hi]))
    if not chunks:
        return CandidateSet(np.zeros((0, 3), dtype=np.int64), nt, 0)

    triples = np.concatenate(chunks).astype(np.int64)
    triples = np.unique(triples, axis=0)
    v = ps.positions
    a, b, c = v[triples[:, 0]], v[triples[:, 1]], v[triples[:, 2]]
    orient = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    keep = np.abs(orient) > degeneracy_tolerance(v)
    dropped = int(np.count_nonzero(~keep))
    if dropped:
        logger.debug("dropped %d collinear candidate triples", dropped)
    return CandidateSet(triples[keep], nt, dropped)


def reduced_cell_signed_distance(ps: WeightedPointSet, tri: CandidateTriangle, corner: int) -> float:
    """
    Signed distance from the triangle's weighted circumcenter to the boundary
    of the corner's reduced power cell, positive inside.

    Raises:
        DegenerateTriangleError: the triangle is collinear.
    """
    j, k, l = tri.indices
    v, w = ps.positions, ps.weights
    center = weighted_circumcenter(v[j], w[j], v[k], w[k], v[l], w[l])
    exclusion = np.asarray(tri.exclusion_for(corner), dtype=np.int64)
    if len(exclusion) == 0:
        return SENTINEL_DISTANCE
    d = bisector_distances(center[None, :], v[corner][None, :], w[corner], v[exclusion], w[exclusion])
    return float(np.min(d))


def _corner_distances(ps: WeightedPointSet, candidates: CandidateSet,
                      centers: np.ndarray, rows: slice) -> Tuple[np.ndarray, np.ndarray]:
    """Min bisector distance and attaining competitor for a block of candidates."""
    v, w = ps.positions, ps.weights
    table = candidates.neighbors.indices
    triples = candidates.triples[rows]
    c = centers[rows]
    m = len(triples)
    dist = np.full((m, 3), SENTINEL_DISTANCE)
    opp = np.full((m, 3), -1, dtype=np.int64)
    if table.shape[1] == 0:
        return dist, opp
    for slot in range(3):
        corner = triples[:, slot]
        nbrs = table[corner]
        d = bisector_distances(c[:, None, :], v[corner][:, None, :], w[corner][:, None], v[nbrs], w[nbrs])
        excluded = (nbrs == triples[:, (slot + 1) % 3, None]) | (nbrs == triples[:, (slot + 2) % 3, None])
        d = np.where(excluded, np.inf, d)
        arg = np.argmin(d, axis=1)
        best = d[np.arange(m), arg]
        has = np.isfinite(best)
        dist[has, slot] = best[has]
        opp[has, slot] = nbrs[np.arange(m), arg][has]
    return dist, opp


def _resolve_threads(threads: Optional[int]) -> int:
    if threads is None:
        threads = int(os.environ.get("DWDT_THREADS", "1") or 1)
    return max(1, int(threads))


def score_candidates(ps: WeightedPointSet, candidates: CandidateSet, alpha: float = DEFAULT_ALPHA,
                     threads: Optional[int] = None) -> SoftTriangulation:
    """Scores for a fixed candidate set (see inclusion_scores)."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    t = candidates.triples
    v, w = ps.positions, ps.weights
    if len(t):
        centers, _ = weighted_circumcenters(v[t[:, 0]], w[t[:, 0]], v[t[:, 1]], w[t[:, 1]],
                                            v[t[:, 2]], w[t[:, 2]])
    else:
        centers = np.zeros((0, 2))

    blocks = [slice(s, min(s + _CHUNK, len(t))) for s in range(0, len(t), _CHUNK)]
    workers = min(_resolve_threads(threads), max(1, len(blocks)))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _corner_distances(ps, candidates, centers, b), blocks))
    else:
        parts = [_corner_distances(ps, candidates, centers, b) for b in blocks]

    if parts:
        distances = np.concatenate([p[0] for p in parts])
        opponents = np.concatenate([p[1] for p in parts])
    else:
        distances = np.zeros((0, 3))
        opponents = np.zeros((0, 3), dtype=np.int64)
    corner = 0.5 * (1.0 + np.tanh(0.5 * alpha * distances))
    corner[opponents < 0] = 1.0
    return SoftTriangulation(ps, candidates, float(alpha), centers, distances, opponents, corner)


def inclusion_scores(ps: WeightedPointSet, alpha: float = DEFAULT_ALPHA, k: int = DEFAULT_K,
                     threads: Optional[int] = None) -> SoftTriangulation:
    """
    Soft triangulation of a weighted point set.

    Args:
        ps: positions and weights, n >= 3.
        alpha: sigmoid sharpness, > 0.
        k: neighbour count, clamped to n - 1.
        threads: worker cap for the distance evaluation (DWDT_THREADS if None).

    Returns:
        SoftTriangulation over the mutual-kNN candidates.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if len(ps) < 3:
        raise ValueError("a triangulation needs at least three vertices")
    nt = knn(ps.positions, k)
    candidates = enumerate_candidates(ps, nt)
    soft = score_candidates(ps, candidates, alpha, threads)
    logger.debug("soft triangulation: %d candidates, k=%d, alpha=%g", len(candidates), nt.k, alpha)
    return soft


def extract_discrete(soft: SoftTriangulation, threshold: float = DEFAULT_THRESHOLD) -> DiscreteMesh:
    """
    Faces whose score exceeds `threshold`, oriented counter-clockwise.

    A score exactly equal to the threshold is settled by the discrete power
    test.
    """
    ps = soft.points
    keep = soft.scores > threshold
    for i in np.flatnonzero(soft.scores == threshold):
        margin, _ = power_margin(ps, soft.triples[i])
        keep[i] = margin > 0
    faces = orient_ccw(ps.positions, soft.triples[keep])
    return DiscreteMesh(ps.positions.copy(), faces)


def corner_score_nodes(tape: Tape, positions: Node, weights: Node, soft: SoftTriangulation,
                       alpha: Optional[float] = None) -> Tuple[Node, Node]:
    """
    Record the corner scores of `soft` on a tape with the competitor choice
    frozen.

    Returns:
        tuple: (corner scores (m, 3), triangle scores (m,)).
    """
    alpha = soft.alpha if alpha is None else alpha
    t = soft.triples
    corners_v = [take(tape, positions, t[:, s]) for s in range(3)]
    corners_w = [take(tape, weights, t[:, s]) for s in range(3)]
    center = weighted_circumcenter_op(tape, corners_v[0], corners_w[0], corners_v[1], corners_w[1],
                                      corners_v[2], corners_w[2])
    columns = []
    for s in range(3):
        opp = soft.opponents[:, s]
        saturated = opp < 0
        # saturated corners get a stand-in competitor; their score is pinned to 1
        stand_in = np.where(saturated, t[:, (s + 1) % 3], opp)
        vm = take(tape, positions, stand_in)
        wm = take(tape, weights, stand_in)
        d = bisector_distance_op(tape, center, corners_v[s], corners_w[s], vm, wm)
        columns.append(sigmoid_op(tape, d, alpha, saturated if np.any(saturated) else None))
    corner = stack_columns(tape, columns)
    triangle = weighted_sum(tape, columns, [1.0 / 3.0] * 3)
    return corner, triangle


def _keys(triples: np.ndarray, n: int) -> np.ndarray:
    t = triples.astype(np.int64)
    return (t[:, 0] * n + t[:, 1]) * n + t[:, 2]


def branch_switches(previous: SoftTriangulation, current: SoftTriangulation,
                    threshold: float = DEFAULT_THRESHOLD) -> int:
    """
    Count frozen-branch changes between two evaluations: corners of shared
    candidates whose competitor changed, plus triangles whose discrete
    membership flipped.
    """
    n = max(len(previous.points), len(current.points))
    k_prev = _keys(previous.triples, n)
    k_cur = _keys(current.triples, n)
    _, i_prev, i_cur = np.intersect1d(k_prev, k_cur, assume_unique=True, return_indices=True)
    changed = int(np.count_nonzero(previous.opponents[i_prev] != current.opponents[i_cur]))

    members_prev = set(k_prev[previous.scores > threshold].tolist())
    members_cur = set(k_cur[current.scores > threshold].tolist())
    flipped = len(members_prev ^ members_cur)
    return changed + flipped


__all__ = [
    "CandidateTriangle",
    "CandidateSet",
    "SoftTriangulation",
    "enumerate_candidates",
    "reduced_cell_signed_distance",
    "score_candidates",
    "inclusion_scores",
    "extract_discrete",
    "corner_score_nodes",
    "branch_switches",
]
