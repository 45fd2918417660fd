#!/usr/bin/env python3
"""
metrics.py

Evaluation measures on discrete 3D meshes: normalized triangle-size RMSE,
curvature-alignment error, corner-angle statistics and the coefficient of
variation of face areas. Every measure also has a variant without the faces
that touch the mesh boundary.

License: GPL-3.0
"""

import logging
from typing import Dict, Optional, Tuple

import numpy as np

from libs.errors import ConfigurationError, UndefinedNormalizationError
from libs.wdt_oracle import DiscreteMesh

logger = logging.getLogger(__name__)

NORMALIZATION_MODES = ("standard", "mean", "auto")
# vertices with |k1| + |k2| below this carry no alignment weight
FLAT_CURVATURE = 1e-12
_CONSTANT = 1e-12


def _lifted(mesh: DiscreteMesh) -> np.ndarray:
    v = mesh.vertices
    return v if v.shape[1] == 3 else np.column_stack([v, np.zeros(len(v))])


def face_areas(mesh: DiscreteMesh) -> np.ndarray:
    p = _lifted(mesh)
    a, b, c = (p[mesh.faces[:, i]] for i in range(3))
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def vertex_sizes(mesh: DiscreteMesh) -> np.ndarray:
    """Mean area of the faces adjacent to each vertex; NaN for unused vertices."""
    n = len(mesh.vertices)
    total = np.zeros(n)
    count = np.zeros(n)
    areas = face_areas(mesh)
    for slot in range(3):
        np.add.at(total, mesh.faces[:, slot], areas)
        np.add.at(count, mesh.faces[:, slot], 1.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(count > 0, total / np.where(count > 0, count, 1.0), np.nan)


def _is_constant(values: np.ndarray) -> bool:
    return float(np.std(values)) <= _CONSTANT * max(float(np.abs(np.mean(values))), 1e-300)


def normalize(values: np.ndarray, mode: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if mode == "standard":
        if _is_constant(values):
            raise UndefinedNormalizationError("constant distribution cannot be standardized")
        return (values - values.mean()) / values.std()
    if mode == "mean":
        mean = float(values.mean())
        if mean == 0.0:
            raise UndefinedNormalizationError("zero-mean distribution cannot be mean-normalized")
        return values / mean
    raise ValueError(f"unknown normalization mode {mode!r}")


def normalized_rmse(achieved: np.ndarray, target: np.ndarray, mode: str = "auto") -> float:
    """
    RMSE between normalized achieved and target values.

    `auto` standardizes (zero mean, unit std) unless the target is constant,
    in which case both are divided by their means.
    """
    if mode not in NORMALIZATION_MODES:
        raise ValueError(f"mode must be one of {NORMALIZATION_MODES}")
    achieved = np.asarray(achieved, dtype=float)
    target = np.asarray(target, dtype=float)
    if achieved.shape != target.shape or achieved.size == 0:
        raise ValueError("achieved and target must be non-empty and equally sized")
    if mode == "auto":
        mode = "mean" if _is_constant(target) else "standard"
    return float(np.sqrt(np.mean((normalize(achieved, mode) - normalize(target, mode)) ** 2)))


def size_rmse(mesh3d: DiscreteMesh, target: np.ndarray, mode: str = "auto",
              vertex_mask: Optional[np.ndarray] = None) -> float:
    """
    Normalized RMSE between per-vertex mean adjacent face areas and targets.

    Args:
        mesh3d: lifted mesh.
        target: per-vertex target areas A(v_j).
        mode: standard, mean or auto.
        vertex_mask: restricts the vertices considered.

    Raises:
        UndefinedNormalizationError: the chosen normalization is undefined.
    """
    if len(mesh3d.faces) == 0:
        raise ValueError("size_rmse needs a non-empty mesh")
    sizes = vertex_sizes(mesh3d)
    mask = ~np.isnan(sizes)
    if vertex_mask is not None:
        mask &= vertex_mask
    return normalized_rmse(sizes[mask], np.asarray(target, dtype=float)[mask], mode)


def _vertex_edges(mesh: DiscreteMesh):
    edges = mesh.edges()
    both = np.concatenate([edges, edges[:, ::-1]])
    order = np.lexsort((both[:, 1], both[:, 0]))
    return both[order]


def best_edge_errors(mesh3d: DiscreteMesh, directions: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-vertex error in degrees: the mean of the angles between +C and the
    best-aligned edge and between -C and its best-aligned edge.

    Returns:
        tuple: (vertex indices with at least one edge, their errors).
    """
    p = _lifted(mesh3d)
    pairs = _vertex_edges(mesh3d)
    if len(pairs) == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    h = p[pairs[:, 0]] - p[pairs[:, 1]]
    h /= np.linalg.norm(h, axis=1)[:, None]
    c = np.asarray(directions, dtype=float)
    c = c / np.linalg.norm(c, axis=1)[:, None]
    cos = np.sum(h * c[pairs[:, 0]], axis=1)
    starts = np.flatnonzero(np.r_[True, pairs[1:, 0] != pairs[:-1, 0]])
    best_pos = np.maximum.reduceat(cos, starts)
    best_neg = np.maximum.reduceat(-cos, starts)
    angle_pos = np.degrees(np.arccos(np.clip(best_pos, -1.0, 1.0)))
    angle_neg = np.degrees(np.arccos(np.clip(best_neg, -1.0, 1.0)))
    return pairs[starts, 0], 0.5 * (angle_pos + angle_neg)


def curvature_weights(k1: np.ndarray, k2: np.ndarray) -> np.ndarray:
    """|k1 - k2| / (0.5 (|k1| + |k2|)); zero where the surface is flat."""
    k1 = np.asarray(k1, dtype=float)
    k2 = np.asarray(k2, dtype=float)
    denom = 0.5 * (np.abs(k1) + np.abs(k2))
    flat = (np.abs(k1) + np.abs(k2)) < FLAT_CURVATURE
    return np.where(flat, 0.0, np.abs(k1 - k2) / np.where(flat, 1.0, denom))


def curvature_alignment_error(mesh3d: DiscreteMesh, directions: np.ndarray,
                              k1: Optional[np.ndarray], k2: Optional[np.ndarray],
                              vertex_mask: Optional[np.ndarray] = None) -> float:
    """
    Curvature-weighted RMSE (degrees) of the best-edge alignment error.

    Raises:
        ConfigurationError: principal curvature magnitudes are missing.
        UndefinedNormalizationError: every vertex has zero weight.
    """
    if k1 is None or k2 is None:
        raise ConfigurationError("curvature alignment error needs principal curvatures k1 and k2")
    idx, err = best_edge_errors(mesh3d, directions)
    w = curvature_weights(k1, k2)[idx]
    if vertex_mask is not None:
        w = w * vertex_mask[idx]
    if float(w.sum()) <= 0.0:
        raise UndefinedNormalizationError("no vertex carries curvature weight")
    return float(np.sqrt(np.sum(w * err ** 2) / np.sum(w)))


def alignment_error(mesh3d: DiscreteMesh, directions: np.ndarray,
                    vertex_mask: Optional[np.ndarray] = None) -> float:
    """Unweighted mean best-edge error in degrees."""
    idx, err = best_edge_errors(mesh3d, directions)
    if vertex_mask is not None:
        keep = vertex_mask[idx]
        err = err[keep]
    if len(err) == 0:
        raise ValueError("no vertex has an edge")
    return float(np.mean(err))


def corner_angles(mesh3d: DiscreteMesh) -> np.ndarray:
    """All corner angles in degrees, (m, 3)."""
    p = _lifted(mesh3d)
    f = mesh3d.faces
    out = np.zeros((len(f), 3))
    for slot in range(3):
        a = p[f[:, slot]]
        e1 = p[f[:, (slot + 1) % 3]] - a
        e2 = p[f[:, (slot + 2) % 3]] - a
        cos = np.sum(e1 * e2, axis=1) / (np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1))
        out[:, slot] = np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))
    return out


def angle_stats(mesh3d: DiscreteMesh) -> Tuple[float, float]:
    """(mean, std) of corner angles in degrees."""
    if len(mesh3d.faces) == 0:
        raise ValueError("angle_stats needs a non-empty mesh")
    angles = corner_angles(mesh3d)
    return float(angles.mean()), float(angles.std())


def area_coefficient_of_variation(mesh3d: DiscreteMesh) -> float:
    areas = face_areas(mesh3d)
    if len(areas) == 0:
        raise ValueError("empty mesh")
    return float(areas.std() / areas.mean())


def boundary_vertices(mesh: DiscreteMesh) -> np.ndarray:
    """Mask of vertices on edges that bound a single face."""
    f = mesh.faces
    e = np.sort(f[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2), axis=1)
    unique, counts = np.unique(e, axis=0, return_counts=True)
    mask = np.zeros(len(mesh.vertices), dtype=bool)
    mask[unique[counts == 1].ravel()] = True
    return mask


def without_boundary(mesh: DiscreteMesh) -> DiscreteMesh:
    """The mesh minus every face touching a boundary vertex."""
    on_boundary = boundary_vertices(mesh)
    keep = ~on_boundary[mesh.faces].any(axis=1)
    return DiscreteMesh(mesh.vertices, mesh.faces[keep])


def compute_metrics(mesh3d: DiscreteMesh, target: Optional[np.ndarray] = None,
                    directions: Optional[np.ndarray] = None, k1: Optional[np.ndarray] = None,
                    k2: Optional[np.ndarray] = None, size_mode: str = "auto") -> Dict[str, Optional[float]]:
    """
    All measures that the available fields allow, with and without boundary
    faces. Measures that cannot be computed are reported as None.
    """
    values: Dict[str, Optional[float]] = {
        "vertices": float(np.count_nonzero(mesh3d.used)),
        "faces": float(len(mesh3d.faces)),
    }
    for suffix, mesh in (("", mesh3d), ("_interior", without_boundary(mesh3d))):
        if len(mesh.faces) == 0:
            logger.warning("no faces left for the%s metrics", suffix.replace("_", " "))
            continue
        mean, std = angle_stats(mesh)
        values["angle_mean" + suffix] = mean
        values["angle_std" + suffix] = std
        values["area_cv" + suffix] = area_coefficient_of_variation(mesh)
        if target is not None:
            try:
                values["size_rmse" + suffix] = size_rmse(mesh, target, size_mode)
            except UndefinedNormalizationError as exc:
                logger.warning("size RMSE undefined: %s", exc)
                values["size_rmse" + suffix] = None
        if directions is not None:
            values["alignment_error" + suffix] = alignment_error(mesh, directions)
            if k1 is not None and k2 is not None:
                try:
                    values["curvature_alignment_error" + suffix] = curvature_alignment_error(
                        mesh, directions, k1, k2)
                except UndefinedNormalizationError as exc:
                    logger.warning("curvature alignment error undefined: %s", exc)
                    values["curvature_alignment_error" + suffix] = None
    return values
