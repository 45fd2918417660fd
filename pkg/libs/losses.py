#!/usr/bin/env python3
"""
losses.py

Mesh-quality objectives over a soft triangulation lifted to 3D:

    size       (1/sum s) sum s_{i|j} (area_3D(t_i) - A(v_j))^2
    boundary   (1/|V|) sum exp(eps - min(eps, d_j)),  d_j signed distance to the domain boundary
    angle      (1/sum s) sum s_{i|j} |cos(angle_j) - 1/2|
    curvature  -(1/sum s) sum_j [LSE(C_j . h * s) + LSE(-C_j . h * s)]

Each term is a tape primitive with its own vector-Jacobian product. The same
primitives evaluated with constant unit scores on the faces of a discrete
mesh give the hard-membership losses used by the annealing baseline.

License: GPL-3.0
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from libs.errors import EmptyTriangulationError, NumericFailure
from libs.gradient_engine import Node, Tape, weighted_sum
from libs.soft_dwdt import SoftTriangulation, corner_score_nodes
from libs.surface_map import (
    BoundaryPolygon,
    FieldSet,
    Parameterization,
    lift_op,
    sample_area_op,
    sample_direction_op,
)

logger = logging.getLogger(__name__)

TERMS = ("size", "boundary", "angle", "curvature")
DEFAULT_EPSILON = 0.01
# adjacent triangles below this score are left out of the curvature term
ADJACENCY_CUTOFF = 1e-3
_MIN_SCORE_SUM = 1e-12

SIZE_TASK_WEIGHTS = {"size": 0.5, "boundary": 500.0, "angle": 1e7, "curvature": 0.0}
ALIGN_TASK_WEIGHTS = {"size": 0.0, "boundary": 500.0, "angle": 0.0, "curvature": 1.0}


def _score_sum(scores: np.ndarray) -> float:
    z = float(np.sum(scores))
    if z < _MIN_SCORE_SUM:
        raise EmptyTriangulationError(f"sum of inclusion scores is {z:.3e}")
    return z


def triangle_areas(points: np.ndarray, triples: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    3D triangle areas and their gradients.

    Returns:
        tuple: (areas (m,), d area / d corner (m, 3, 3)) with corners in triple order.
    """
    a, b, c = (points[triples[:, i]] for i in range(3))
    normal = np.cross(b - a, c - a)
    norm = np.linalg.norm(normal, axis=1)
    if np.any(norm == 0.0):
        raise NumericFailure("zero-area triangle", "triangle_size_loss")
    unit = normal / norm[:, None]
    grads = 0.5 * np.stack([np.cross(unit, c - b), np.cross(unit, a - c), np.cross(unit, b - a)], axis=1)
    return 0.5 * norm, grads


def corner_cosines(points: np.ndarray, triples: np.ndarray, slot: int):
    """Cosine of the corner angle at `slot` with its derivatives w.r.t. both edge vectors."""
    j = triples[:, slot]
    k = triples[:, (slot + 1) % 3]
    l = triples[:, (slot + 2) % 3]
    e1 = points[k] - points[j]
    e2 = points[l] - points[j]
    n1 = np.linalg.norm(e1, axis=1)
    n2 = np.linalg.norm(e2, axis=1)
    if np.any(n1 == 0.0) or np.any(n2 == 0.0):
        raise NumericFailure("zero-length edge at a corner", "angle_loss")
    cos = np.sum(e1 * e2, axis=1) / (n1 * n2)
    d_e1 = e2 / (n1 * n2)[:, None] - (cos / n1 ** 2)[:, None] * e1
    d_e2 = e1 / (n1 * n2)[:, None] - (cos / n2 ** 2)[:, None] * e2
    return cos, d_e1, d_e2, (j, k, l)


def triangle_size_op(tape: Tape, corner_scores: Node, lifted: Node, area: Node,
                     triples: np.ndarray) -> Node:
    s = corner_scores.value
    points = lifted.value
    z = _score_sum(s)
    areas, area_grads = triangle_areas(points, triples)
    residual = areas[:, None] - area.value[triples]
    value = float(np.sum(s * residual ** 2) / z)

    def vjp(g):
        g = float(g)
        d_s = g * (residual ** 2 - value) / z
        d_res = g * 2.0 * s * residual / z
        d_points = np.zeros_like(points)
        d_area_tri = d_res.sum(axis=1)
        for slot in range(3):
            np.add.at(d_points, triples[:, slot], d_area_tri[:, None] * area_grads[:, slot])
        d_target = np.zeros_like(area.value)
        np.add.at(d_target, triples.ravel(), -d_res.ravel())
        return d_s, d_points, d_target

    return tape.apply("triangle_size_loss", value, (corner_scores, lifted, area), vjp)


def boundary_repulsion_op(tape: Tape, positions: Node, boundary: BoundaryPolygon,
                          epsilon: float = DEFAULT_EPSILON) -> Node:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    d, grad = boundary.signed_distance(positions.value)
    terms = np.exp(epsilon - np.minimum(epsilon, d))
    n = len(d)
    value = float(np.mean(terms))
    active = d < epsilon

    def vjp(g):
        scale = -float(g) * terms * active / n
        return (scale[:, None] * grad,)

    return tape.apply("boundary_repulsion_loss", value, (positions,), vjp)


def angle_op(tape: Tape, corner_scores: Node, lifted: Node, triples: np.ndarray) -> Node:
    s = corner_scores.value
    points = lifted.value
    z = _score_sum(s)
    per_slot = [corner_cosines(points, triples, slot) for slot in range(3)]
    dev = np.column_stack([np.abs(c[0] - 0.5) for c in per_slot])
    value = float(np.sum(s * dev) / z)

    def vjp(g):
        g = float(g)
        d_s = g * (dev - value) / z
        d_points = np.zeros_like(points)
        for slot, (cos, d_e1, d_e2, (j, k, l)) in enumerate(per_slot):
            d_cos = g * s[:, slot] * np.sign(cos - 0.5) / z
            ge1 = d_cos[:, None] * d_e1
            ge2 = d_cos[:, None] * d_e2
            np.add.at(d_points, k, ge1)
            np.add.at(d_points, l, ge2)
            np.add.at(d_points, j, -(ge1 + ge2))
        return d_s, d_points

    return tape.apply("angle_loss", value, (corner_scores, lifted), vjp)


@dataclass
class AlignmentEdges:
    """Flattened (vertex, edge) entries of the curvature term, grouped by vertex and sign."""

    vertex: np.ndarray
    other: np.ndarray
    triangle: np.ndarray
    slot: np.ndarray
    isolated: List[int] = field(default_factory=list)


def alignment_edges(triples: np.ndarray, scores: np.ndarray, n: int,
                    cutoff: float = ADJACENCY_CUTOFF) -> AlignmentEdges:
    """Two edges per corner of every triangle scoring above `cutoff`, sorted by vertex."""
    keep = np.flatnonzero(scores > cutoff)
    t = triples[keep]
    vertex, other, tri, slot = [], [], [], []
    for s in range(3):
        for step in (1, 2):
            vertex.append(t[:, s])
            other.append(t[:, (s + step) % 3])
            tri.append(keep)
            slot.append(np.full(len(keep), s))
    vertex_arr = np.concatenate(vertex)
    order = np.lexsort((np.concatenate(other), vertex_arr))
    present = np.zeros(n, dtype=bool)
    present[vertex_arr] = True
    isolated = [int(i) for i in np.flatnonzero(~present)]
    return AlignmentEdges(vertex_arr[order], np.concatenate(other)[order],
                          np.concatenate(tri)[order], np.concatenate(slot)[order], isolated)


def _group_logsumexp(x: np.ndarray, starts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """LogSumExp per contiguous group and the softmax weights of every entry."""
    counts = np.diff(np.append(starts, len(x)))
    shift = np.maximum.reduceat(x, starts)
    ex = np.exp(x - np.repeat(shift, counts))
    total = np.add.reduceat(ex, starts)
    lse = shift + np.log(total)
    return lse, ex / np.repeat(total, counts)


def curvature_alignment_op(tape: Tape, corner_scores: Node, lifted: Node, direction: Node,
                           triples: np.ndarray, edges: AlignmentEdges) -> Node:
    s_all = corner_scores.value
    points = lifted.value
    field_c = direction.value
    z = _score_sum(s_all)
    if len(edges.vertex) == 0:
        raise EmptyTriangulationError("no vertex has an adjacent triangle above the cutoff")
    if edges.isolated:
        logger.debug("curvature term skips %d isolated vertices", len(edges.isolated))

    diff = points[edges.vertex] - points[edges.other]
    length = np.linalg.norm(diff, axis=1)
    if np.any(length == 0.0):
        raise NumericFailure("zero-length edge", "curvature_alignment_loss")
    h = diff / length[:, None]
    align = np.sum(field_c[edges.vertex] * h, axis=1)
    s = s_all[edges.triangle, edges.slot]
    starts = np.flatnonzero(np.r_[True, edges.vertex[1:] != edges.vertex[:-1]])
    lse_pos, w_pos = _group_logsumexp(align * s, starts)
    lse_neg, w_neg = _group_logsumexp(-align * s, starts)
    value = float(-(lse_pos.sum() + lse_neg.sum()) / z)

    def vjp(g):
        g = float(g)
        # d value / d (align * s) for every entry
        d_x = -g * (w_pos - w_neg) / z
        d_s_all = np.full_like(s_all, -g * value / z)
        np.add.at(d_s_all, (edges.triangle, edges.slot), d_x * align)
        d_align = d_x * s
        d_field = np.zeros_like(field_c)
        np.add.at(d_field, edges.vertex, d_align[:, None] * h)
        d_h = d_align[:, None] * field_c[edges.vertex]
        d_diff = (d_h - np.sum(d_h * h, axis=1)[:, None] * h) / length[:, None]
        d_points = np.zeros_like(points)
        np.add.at(d_points, edges.vertex, d_diff)
        np.add.at(d_points, edges.other, -d_diff)
        return d_s_all, d_points, d_field

    return tape.apply("curvature_alignment_loss", value, (corner_scores, lifted, direction), vjp)


# ---------------------------------------------------------------------------
# Composition
# ---------------------------------------------------------------------------

@dataclass
class LossProblem:
    """
    Everything a loss evaluation needs besides the parameters themselves:
    the frozen soft triangulation, the surface, the fields and the boundary.
    """

    surface: Parameterization
    fields: FieldSet
    weights: Mapping[str, float]
    epsilon: float = DEFAULT_EPSILON
    boundary: Optional[BoundaryPolygon] = None
    cutoff: float = ADJACENCY_CUTOFF

    def __post_init__(self) -> None:
        unknown = set(self.weights) - set(TERMS)
        if unknown:
            raise ValueError(f"unknown loss terms {sorted(unknown)}")
        if not any(self.weights.get(t, 0.0) > 0 for t in TERMS):
            raise ValueError("at least one loss weight must be positive")
        if any(self.weights.get(t, 0.0) < 0 for t in TERMS):
            raise ValueError("loss weights must be non-negative")
        if self.boundary is None:
            self.boundary = self.surface.boundary

    def active_terms(self) -> List[str]:
        return [t for t in TERMS if self.weights.get(t, 0.0) > 0]


def record_terms(tape: Tape, positions: Node, corner: Node, triples: np.ndarray,
                 problem: LossProblem, terms: Optional[List[str]] = None) -> Dict[str, Node]:
    """Record the requested loss terms for fixed scores on a tape."""
    terms = problem.active_terms() if terms is None else terms
    out: Dict[str, Node] = {}
    lifted = lift_op(tape, problem.surface, positions) if set(terms) & {"size", "angle", "curvature"} else None
    if "size" in terms:
        area = sample_area_op(tape, problem.fields.require_area(), positions)
        out["size"] = triangle_size_op(tape, corner, lifted, area, triples)
    if "boundary" in terms:
        out["boundary"] = boundary_repulsion_op(tape, positions, problem.boundary, problem.epsilon)
    if "angle" in terms:
        out["angle"] = angle_op(tape, corner, lifted, triples)
    if "curvature" in terms:
        direction = sample_direction_op(tape, problem.fields.require_direction(), positions)
        edges = alignment_edges(triples, corner.value.mean(axis=1), len(positions.value), problem.cutoff)
        out["curvature"] = curvature_alignment_op(tape, corner, lifted, direction, triples, edges)
    return out


def total_loss(tape: Tape, terms: Mapping[str, Node], weights: Mapping[str, float]) -> Node:
    """Weighted sum of recorded terms."""
    names = [t for t in TERMS if t in terms and weights.get(t, 0.0) > 0]
    if not names:
        raise ValueError("no weighted loss term recorded")
    return weighted_sum(tape, [terms[t] for t in names], [float(weights[t]) for t in names])


def soft_expression(soft: SoftTriangulation, problem: LossProblem,
                    sink: Optional[Dict[str, float]] = None):
    """
    Loss expression over a frozen soft triangulation, usable with
    evaluate_with_gradient. Per-term values are written to `sink`.
    """

    def expr(tape: Tape, positions: Node, weights: Node) -> Node:
        corner, _ = corner_score_nodes(tape, positions, weights, soft)
        terms = record_terms(tape, positions, corner, soft.triples, problem)
        if sink is not None:
            sink.clear()
            sink.update({name: float(node.value) for name, node in terms.items()})
        return total_loss(tape, terms, problem.weights)

    return expr


def evaluate_terms(soft: SoftTriangulation, problem: LossProblem) -> Dict[str, float]:
    """Per-term values (unweighted) plus their weighted total under key 'total'."""
    tape = Tape()
    positions = tape.constant(soft.points.positions, "positions")
    weights = tape.constant(soft.points.weights, "weights")
    corner, _ = corner_score_nodes(tape, positions, weights, soft)
    terms = record_terms(tape, positions, corner, soft.triples, problem)
    values = {name: float(node.value) for name, node in terms.items()}
    values["total"] = float(sum(problem.weights[t] * v for t, v in values.items()))
    return values


def discrete_terms(positions: np.ndarray, faces: np.ndarray, problem: LossProblem) -> Dict[str, float]:
    """
    The same losses with hard membership: unit scores on `faces`, nothing
    elsewhere.
    """
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if len(faces) == 0:
        raise EmptyTriangulationError("discrete mesh has no faces")
    tape = Tape()
    pos = tape.constant(positions, "positions")
    corner = tape.constant(np.ones((len(faces), 3)), "scores")
    terms = record_terms(tape, pos, corner, np.sort(faces, axis=1), problem)
    values = {name: float(node.value) for name, node in terms.items()}
    values["total"] = float(sum(problem.weights[t] * v for t, v in values.items()))
    return values
