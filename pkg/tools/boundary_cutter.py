#!/usr/bin/env python3
"""
boundary_cutter.py

Makes an optimized 2D triangulation conform to the patch boundary. Faces
covered by the boundary polygon are kept; the region between their union and
the boundary is filled with a constrained Delaunay triangulation, so every
boundary segment becomes a mesh edge.

License: GPL-3.0
"""

import logging
from typing import Dict, List, Tuple

import numpy as np
import shapely
from scipy.spatial import cKDTree
from shapely.geometry import MultiPolygon, Polygon
from shapely.ops import unary_union

from libs.errors import BoundaryViolationError
from libs.surface_map import BoundaryPolygon
from libs.wdt_oracle import DiscreteMesh, orient_ccw

logger = logging.getLogger(__name__)

# relative (times polygon diagonal) tolerance for matching and containment
MATCH_FACTOR = 1e-12


def outside_vertices(mesh2d: DiscreteMesh, boundary: BoundaryPolygon, tolerance: float) -> List[int]:
    """Used vertices strictly outside the boundary beyond `tolerance`."""
    used = np.flatnonzero(mesh2d.used)
    if len(used) == 0:
        return []
    d, _ = boundary.signed_distance(mesh2d.vertices[used])
    return [int(i) for i in used[d < -tolerance]]


def _parts(geometry) -> List[Polygon]:
    if geometry.is_empty:
        return []
    if isinstance(geometry, Polygon):
        return [geometry]
    if isinstance(geometry, MultiPolygon):
        return list(geometry.geoms)
    return [g for g in getattr(geometry, "geoms", []) if isinstance(g, Polygon) and not g.is_empty]


def cut_to_boundary(mesh2d: DiscreteMesh, boundary: BoundaryPolygon) -> DiscreteMesh:
    """
    Clip and re-triangulate a 2D mesh along the boundary polygon.

    Args:
        mesh2d: extracted triangulation; all used vertices inside the boundary.
        boundary: the patch boundary.

    Returns:
        DiscreteMesh whose faces cover exactly the boundary polygon. Boundary
        polygon vertices that were not mesh vertices are appended.

    Raises:
        BoundaryViolationError: some used vertices lie outside the boundary.
    """
    diag = boundary.diagonal
    tol = MATCH_FACTOR * max(diag, 1e-300)
    bad = outside_vertices(mesh2d, boundary, tol)
    if bad:
        logger.error("%d vertices lie outside the boundary: %s", len(bad), bad[:10])
        raise BoundaryViolationError(f"{len(bad)} vertices lie outside the boundary", bad)

    if mesh2d.dimension != 2:
        raise ValueError("cut_to_boundary works on 2D meshes")
    vertices = mesh2d.vertices
    faces = mesh2d.faces
    polygon = boundary.polygon
    if len(faces):
        triangles = shapely.polygons(vertices[faces])
        keep = shapely.covered_by(triangles, polygon)
        kept_faces = faces[keep]
        covered = unary_union(triangles[keep]) if np.any(keep) else Polygon()
    else:
        kept_faces = np.zeros((0, 3), dtype=np.int64)
        covered = Polygon()
    dropped = len(faces) - len(kept_faces)

    remainder = polygon.difference(covered) if not covered.is_empty else polygon
    parts = [p for p in _parts(remainder) if p.area > tol * tol]
    if not parts:
        logger.debug("mesh already conforms to the boundary")
        return DiscreteMesh(mesh2d.vertices.copy(), kept_faces, mesh2d.used & _referenced(kept_faces, len(vertices)))

    points: List[np.ndarray] = [vertices]
    tree = cKDTree(vertices) if len(vertices) else None
    appended: Dict[Tuple[float, float], int] = {}

    def index_of(xy: Tuple[float, float]) -> int:
        if tree is not None:
            dist, idx = tree.query(xy)
            if dist <= tol:
                return int(idx)
        key = (float(xy[0]), float(xy[1]))
        if key not in appended:
            appended[key] = len(vertices) + len(appended)
        return appended[key]

    new_faces: List[List[int]] = []
    for part in parts:
        for tri in shapely.constrained_delaunay_triangles(part).geoms:
            if tri.area <= tol * tol:
                continue
            coords = np.asarray(tri.exterior.coords)[:3]
            new_faces.append([index_of(tuple(c)) for c in coords])

    if appended:
        extra = np.array(sorted(appended, key=appended.get), dtype=float)
        points.append(extra)
    all_vertices = np.concatenate(points)
    out_faces = np.concatenate([kept_faces, np.asarray(new_faces, dtype=np.int64).reshape(-1, 3)])
    out_faces = orient_ccw(all_vertices[:, :2], out_faces)
    logger.info("boundary cut: kept %d faces, dropped %d, filled %d, inserted %d boundary vertices",
                len(kept_faces), dropped, len(new_faces), len(appended))
    return DiscreteMesh(all_vertices, out_faces)


def _referenced(faces: np.ndarray, n: int) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    if len(faces):
        mask[faces.ravel()] = True
    return mask


def boundary_edges_present(mesh: DiscreteMesh, boundary: BoundaryPolygon) -> bool:
    """
    True iff every boundary segment is covered by mesh edges lying on it
    (a segment may be split by vertices on its interior).
    """
    edges = mesh.edges()
    if len(edges) == 0:
        return False
    pts = mesh.vertices[:, :2]
    tol = 1e-9 * boundary.diagonal
    for a, b in zip(boundary.starts, boundary.ends):
        seg = b - a
        length = np.linalg.norm(seg)
        unit = seg / length
        rel_p = pts[edges[:, 0]] - a
        rel_q = pts[edges[:, 1]] - a
        off_p = np.abs(rel_p[:, 0] * unit[1] - rel_p[:, 1] * unit[0])
        off_q = np.abs(rel_q[:, 0] * unit[1] - rel_q[:, 1] * unit[0])
        on = (off_p <= tol) & (off_q <= tol)
        tp = rel_p[on] @ unit
        tq = rel_q[on] @ unit
        lo, hi = np.minimum(tp, tq), np.maximum(tp, tq)
        inside = (lo >= -tol) & (hi <= length + tol)
        intervals = sorted(zip(lo[inside], hi[inside]))
        reach = 0.0
        for start, end in intervals:
            if start > reach + tol:
                return False
            reach = max(reach, end)
        if reach < length - tol:
            return False
    return True
