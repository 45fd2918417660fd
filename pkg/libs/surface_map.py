#!/usr/bin/env python3
"""
surface_map.py

Parameterizations between 3D surface patches and their 2D domains.

Three surfaces are provided: the plane (identity lift, z = 0), the catenoid
(cosh v cos u, cosh v sin u, v) over u in [0, 2pi), v in [-1, 1], and
piecewise-linear UV patch meshes read from OBJ files. Each exposes the lift
m^-1, its Jacobian, the forward map where it exists and the 2D boundary
polygon of the domain. Target-area fields A and direction fields C are
sampled at 2D locations; their tape primitives live at the bottom of this
module.

License: GPL-3.0
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import shapely
from shapely.geometry import Polygon
from shapely.geometry.polygon import orient

from libs.errors import ConfigurationError, InvalidPatchError, OutsideDomainError
from libs.gradient_engine import Node, Tape

logger = logging.getLogger(__name__)

# barycentric slack for point location; ties go to the lower face index
EDGE_TOLERANCE = 1e-9
# relative distance (times domain diagonal) a point may sit outside the domain
SNAP_FACTOR = 1e-9
DEFAULT_UV_EDGE_LENGTH = 0.05


# ---------------------------------------------------------------------------
# Boundary polygon
# ---------------------------------------------------------------------------

class BoundaryPolygon:
    """
    A simple polygon (optionally with holes) with its exterior ring CCW.

    Segment queries return the closest boundary point b, the inward normal of
    the closest segment and the signed distance, positive inside.
    """

    def __init__(self, polygon: Polygon) -> None:
        if polygon.is_empty or not polygon.is_valid:
            raise InvalidPatchError("boundary polygon is empty or not simple")
        self.polygon = orient(polygon, sign=1.0)
        starts, ends = [], []
        for ring in [self.polygon.exterior, *self.polygon.interiors]:
            coords = np.asarray(ring.coords)[:-1]
            starts.append(coords)
            ends.append(np.roll(coords, -1, axis=0))
        self.starts = np.concatenate(starts)
        self.ends = np.concatenate(ends)
        edge = self.ends - self.starts
        lengths = np.linalg.norm(edge, axis=1)
        # left-hand normals point inside for a CCW exterior and CW holes
        self.normals = np.column_stack([-edge[:, 1], edge[:, 0]]) / lengths[:, None]

    @classmethod
    def from_coords(cls, coords) -> "BoundaryPolygon":
        return cls(Polygon(np.asarray(coords, dtype=float)))

    @classmethod
    def rectangle(cls, xmin: float, ymin: float, xmax: float, ymax: float) -> "BoundaryPolygon":
        return cls(Polygon([(xmin, ymin), (xmax, ymin), (xmax, ymax), (xmin, ymax)]))

    @property
    def vertices(self) -> np.ndarray:
        """Exterior ring vertices, CCW, without the closing repeat."""
        return np.asarray(self.polygon.exterior.coords)[:-1]

    @property
    def area(self) -> float:
        return float(self.polygon.area)

    @property
    def diagonal(self) -> float:
        xmin, ymin, xmax, ymax = self.polygon.bounds
        return float(np.hypot(xmax - xmin, ymax - ymin))

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return shapely.contains_xy(self.polygon, points[:, 0], points[:, 1])

    def _closest(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Closest segment index, projection parameter and foot point per query."""
        edge = self.ends - self.starts
        rel = points[:, None, :] - self.starts[None, :, :]
        t = np.sum(rel * edge[None], axis=2) / np.sum(edge * edge, axis=1)[None]
        t = np.clip(t, 0.0, 1.0)
        feet = self.starts[None] + t[..., None] * edge[None]
        dist = np.sum((points[:, None, :] - feet) ** 2, axis=2)
        seg = np.argmin(dist, axis=1)
        rows = np.arange(len(points))
        return seg, t[rows, seg], feet[rows, seg]

    def closest_points(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return self._closest(points)[2]

    def inward_normals(self, points) -> np.ndarray:
        """Inward unit normal of the segment closest to each query."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return self.normals[self._closest(points)[0]]

    def signed_distance(self, points) -> Tuple[np.ndarray, np.ndarray]:
        """
        Signed distances to the boundary and their gradients.

        Args:
            points: (n, 2) queries.

        Returns:
            tuple: (distances (n,), d distance / d point (n, 2)).
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        seg, t, feet = self._closest(points)
        normals = self.normals[seg]
        interior = (t > 0.0) & (t < 1.0)
        d = np.sum((points - feet) * normals, axis=1)
        grad = normals.copy()

        corner = ~interior
        if np.any(corner):
            offset = points[corner] - feet[corner]
            r = np.linalg.norm(offset, axis=1)
            sign = np.where(self.contains(points[corner]), 1.0, -1.0)
            d[corner] = sign * r
            safe = np.where(r > 0.0, r, 1.0)
            g = sign[:, None] * offset / safe[:, None]
            grad[corner] = np.where((r > 0.0)[:, None], g, normals[corner])
        return d, grad


# ---------------------------------------------------------------------------
# Parameterizations
# ---------------------------------------------------------------------------

class Parameterization(ABC):
    """Lift m^-1 from a 2D domain onto a 3D surface."""

    name = "surface"

    @abstractmethod
    def lift(self, uv: np.ndarray) -> np.ndarray:
        """(n, 2) domain points to (n, 3) surface points."""

    @abstractmethod
    def jacobian(self, uv: np.ndarray) -> np.ndarray:
        """(n, 3, 2) Jacobians of the lift; columns are d/du and d/dv."""

    @abstractmethod
    def forward(self, xyz: np.ndarray) -> np.ndarray:
        """(n, 3) surface points to (n, 2) domain points."""

    @property
    @abstractmethod
    def boundary(self) -> BoundaryPolygon:
        """The domain boundary."""

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        return tuple(float(b) for b in self.boundary.polygon.bounds)

    def contains(self, uv: np.ndarray, tolerance: Optional[float] = None) -> np.ndarray:
        uv = np.atleast_2d(np.asarray(uv, dtype=float))
        if tolerance is None:
            tolerance = SNAP_FACTOR * self.boundary.diagonal
        d, _ = self.boundary.signed_distance(uv)
        return d >= -tolerance

    def area_element(self, uv: np.ndarray) -> np.ndarray:
        """sqrt(det(J^T J)): surface area per unit domain area."""
        jac = self.jacobian(np.atleast_2d(uv))
        gram = np.einsum("nki,nkj->nij", jac, jac)
        det = gram[:, 0, 0] * gram[:, 1, 1] - gram[:, 0, 1] * gram[:, 1, 0]
        return np.sqrt(np.maximum(det, 0.0))

    def max_area_element(self) -> float:
        xmin, ymin, xmax, ymax = self.bounds
        gx, gy = np.meshgrid(np.linspace(xmin, xmax, 65), np.linspace(ymin, ymax, 65))
        grid = np.column_stack([gx.ravel(), gy.ravel()])
        grid = grid[self.boundary.contains(grid)]
        if len(grid) == 0:
            return 1.0
        return float(self.area_element(grid).max()) * 1.05

    def sample_uniform(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """
        Points whose lifts are uniform over the surface area (rejection
        sampling against the area element).
        """
        xmin, ymin, xmax, ymax = self.bounds
        peak = self.max_area_element()
        out: List[np.ndarray] = []
        have = 0
        while have < count:
            batch = rng.uniform((xmin, ymin), (xmax, ymax), size=(max(4 * count, 64), 2))
            batch = batch[self.boundary.contains(batch)]
            if len(batch) == 0:
                continue
            accept = rng.uniform(0.0, peak, size=len(batch)) < self.area_element(batch)
            out.append(batch[accept])
            have += int(np.count_nonzero(accept))
        return np.concatenate(out)[:count]

    def sample_domain(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Points uniform over the 2D domain."""
        xmin, ymin, xmax, ymax = self.bounds
        out: List[np.ndarray] = []
        have = 0
        while have < count:
            batch = rng.uniform((xmin, ymin), (xmax, ymax), size=(max(2 * count, 64), 2))
            batch = batch[self.boundary.contains(batch)]
            out.append(batch)
            have += len(batch)
        return np.concatenate(out)[:count]


class PlaneSurface(Parameterization):
    """The identity lift (x, y) -> (x, y, 0) over a rectangle."""

    name = "plane"

    def __init__(self, xmin: float = 0.0, ymin: float = 0.0, xmax: float = 1.0, ymax: float = 1.0) -> None:
        if xmax <= xmin or ymax <= ymin:
            raise ValueError("empty plane domain")
        self._boundary = BoundaryPolygon.rectangle(xmin, ymin, xmax, ymax)

    @property
    def boundary(self) -> BoundaryPolygon:
        return self._boundary

    def lift(self, uv):
        uv = np.atleast_2d(np.asarray(uv, dtype=float))
        return np.column_stack([uv, np.zeros(len(uv))])

    def jacobian(self, uv):
        n = len(np.atleast_2d(uv))
        jac = np.zeros((n, 3, 2))
        jac[:, 0, 0] = 1.0
        jac[:, 1, 1] = 1.0
        return jac

    def forward(self, xyz):
        return np.atleast_2d(np.asarray(xyz, dtype=float))[:, :2].copy()


class Catenoid(Parameterization):
    """(u, v) -> (cosh v cos u, cosh v sin u, v), u in [0, 2pi), v in [v_min, v_max]."""

    name = "catenoid"

    def __init__(self, v_min: float = -1.0, v_max: float = 1.0) -> None:
        if v_max <= v_min:
            raise ValueError("empty catenoid domain")
        self.v_min = v_min
        self.v_max = v_max
        self._boundary = BoundaryPolygon.rectangle(0.0, v_min, 2.0 * np.pi, v_max)

    @property
    def boundary(self) -> BoundaryPolygon:
        return self._boundary

    def lift(self, uv):
        uv = np.atleast_2d(np.asarray(uv, dtype=float))
        u, v = uv[:, 0], uv[:, 1]
        return np.column_stack([np.cosh(v) * np.cos(u), np.cosh(v) * np.sin(u), v])

    def jacobian(self, uv):
        uv = np.atleast_2d(np.asarray(uv, dtype=float))
        u, v = uv[:, 0], uv[:, 1]
        jac = np.zeros((len(uv), 3, 2))
        jac[:, 0, 0] = -np.cosh(v) * np.sin(u)
        jac[:, 1, 0] = np.cosh(v) * np.cos(u)
        jac[:, 0, 1] = np.sinh(v) * np.cos(u)
        jac[:, 1, 1] = np.sinh(v) * np.sin(u)
        jac[:, 2, 1] = 1.0
        return jac

    def forward(self, xyz):
        xyz = np.atleast_2d(np.asarray(xyz, dtype=float))
        u = np.mod(np.arctan2(xyz[:, 1], xyz[:, 0]), 2.0 * np.pi)
        return np.column_stack([u, xyz[:, 2]])

    def area_element(self, uv):
        v = np.atleast_2d(np.asarray(uv, dtype=float))[:, 1]
        return np.cosh(v) ** 2

    def max_area_element(self) -> float:
        return float(max(np.cosh(self.v_min), np.cosh(self.v_max)) ** 2)

    @staticmethod
    def curvatures(uv) -> Tuple[np.ndarray, np.ndarray]:
        """Principal curvatures (k1, k2) = (1/cosh^2 v, -1/cosh^2 v)."""
        v = np.atleast_2d(np.asarray(uv, dtype=float))[:, 1]
        k = 1.0 / np.cosh(v) ** 2
        return k, -k


@dataclass
class UvPatchMesh:
    """
    A triangulated 3D patch with per-vertex UV coordinates and optional
    per-vertex fields: target area A, unit directions C and principal
    curvatures k1, k2.
    """

    vertices: np.ndarray
    uv: np.ndarray
    faces: np.ndarray
    area: Optional[np.ndarray] = None
    direction: Optional[np.ndarray] = None
    k1: Optional[np.ndarray] = None
    k2: Optional[np.ndarray] = None
    metadata: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.uv = np.asarray(self.uv, dtype=float).reshape(-1, 2)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        n = len(self.vertices)
        if len(self.uv) != n:
            raise InvalidPatchError(f"{len(self.uv)} UV coordinates for {n} vertices")
        if len(self.faces) == 0:
            raise InvalidPatchError("patch has no faces")
        if self.faces.min() < 0 or self.faces.max() >= n:
            raise InvalidPatchError("face index out of range")
        signed = self.uv_signed_areas()
        scale = float(np.ptp(self.uv, axis=0).max()) ** 2
        if np.any(np.abs(signed) <= 1e-14 * scale):
            bad = int(np.flatnonzero(np.abs(signed) <= 1e-14 * scale)[0])
            raise InvalidPatchError(f"UV face {bad} is degenerate")
        if np.all(signed < 0):
            self.faces = self.faces[:, [0, 2, 1]]
        elif np.any(signed < 0):
            bad = int(np.flatnonzero(signed < 0)[0])
            raise InvalidPatchError(f"UV face {bad} is inverted")
        if self.direction is not None:
            self.direction = np.asarray(self.direction, dtype=float).reshape(-1, 3)
            norms = np.linalg.norm(self.direction, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-6):
                raise ValueError("direction field vectors must be unit length")
        for name in ("area", "k1", "k2"):
            values = getattr(self, name)
            if values is not None:
                values = np.asarray(values, dtype=float).reshape(-1)
                if len(values) != n:
                    raise ValueError(f"field {name} has {len(values)} values for {n} vertices")
                setattr(self, name, values)

    def uv_signed_areas(self) -> np.ndarray:
        a, b, c = (self.uv[self.faces[:, i]] for i in range(3))
        return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))

    def uv_edges(self) -> np.ndarray:
        e = self.faces[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2)
        return np.unique(np.sort(e, axis=1), axis=0)

    def average_uv_edge_length(self) -> float:
        e = self.uv_edges()
        return float(np.mean(np.linalg.norm(self.uv[e[:, 1]] - self.uv[e[:, 0]], axis=1)))


def boundary_polygon(mesh: UvPatchMesh) -> BoundaryPolygon:
    """
    The CCW boundary of a patch's UV domain.

    Raises:
        InvalidPatchError: an edge has more than two faces, a boundary vertex
            is pinched, or the boundary loops do not form a simple polygon.
    """
    directed = mesh.faces[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2)
    undirected, counts = np.unique(np.sort(directed, axis=1), axis=0, return_counts=True)
    if np.any(counts > 2):
        bad = undirected[np.argmax(counts > 2)]
        raise InvalidPatchError(f"edge {tuple(int(i) for i in bad)} has more than two faces")
    boundary_keys = {tuple(int(i) for i in e) for e in undirected[counts == 1]}
    successor: Dict[int, int] = {}
    for a, b in directed:
        a, b = int(a), int(b)
        if (min(a, b), max(a, b)) in boundary_keys:
            if a in successor:
                raise InvalidPatchError(f"boundary vertex {a} is non-manifold")
            successor[a] = b

    loops: List[List[int]] = []
    remaining = dict(successor)
    while remaining:
        start = min(remaining)
        loop = [start]
        nxt = remaining.pop(start)
        while nxt != start:
            if nxt not in remaining:
                raise InvalidPatchError("boundary edges do not close into loops")
            loop.append(nxt)
            nxt = remaining.pop(nxt)
        loops.append(loop)
    if not loops:
        raise InvalidPatchError("patch has no boundary")

    rings = [Polygon(mesh.uv[loop]) for loop in loops]
    outer = int(np.argmax([r.area for r in rings]))
    holes = [mesh.uv[loop] for i, loop in enumerate(loops) if i != outer]
    try:
        return BoundaryPolygon(Polygon(mesh.uv[loops[outer]], holes))
    except InvalidPatchError:
        logger.error("patch boundary is not a simple polygon (%d loops)", len(loops))
        raise


def normalize_uv(mesh: UvPatchMesh, edge_length: float = DEFAULT_UV_EDGE_LENGTH) -> Tuple[UvPatchMesh, float]:
    """
    Rescale UVs so the average UV edge length equals `edge_length`.

    Returns:
        tuple: (rescaled mesh, scale factor applied to the UVs).
    """
    if edge_length <= 0:
        raise ValueError("edge_length must be positive")
    factor = edge_length / mesh.average_uv_edge_length()
    scaled = UvPatchMesh(mesh.vertices.copy(), mesh.uv * factor, mesh.faces.copy(), mesh.area,
                         mesh.direction, mesh.k1, mesh.k2, dict(mesh.metadata, uv_scale=factor))
    logger.info("normalized UV coordinates by factor %.6g", factor)
    return scaled, factor


class _FaceGrid:
    """Uniform bucket grid over UV face bounding boxes."""

    def __init__(self, uv: np.ndarray, faces: np.ndarray) -> None:
        tri = uv[faces]
        self.lo = uv.min(axis=0)
        hi = uv.max(axis=0)
        cells = max(1, int(np.ceil(np.sqrt(len(faces)))))
        self.size = np.maximum((hi - self.lo) / cells, 1e-300)
        self.cells = cells
        self.buckets: Dict[Tuple[int, int], List[int]] = {}
        fmin = self._cell(tri.min(axis=1))
        fmax = self._cell(tri.max(axis=1))
        for f in range(len(faces)):
            for cx in range(fmin[f, 0], fmax[f, 0] + 1):
                for cy in range(fmin[f, 1], fmax[f, 1] + 1):
                    self.buckets.setdefault((cx, cy), []).append(f)

    def _cell(self, points: np.ndarray) -> np.ndarray:
        c = np.floor((points - self.lo) / self.size).astype(np.int64)
        return np.clip(c, 0, self.cells - 1)

    def candidates(self, point: np.ndarray) -> List[int]:
        cx, cy = self._cell(point[None])[0]
        return self.buckets.get((int(cx), int(cy)), [])


class PatchSurface(Parameterization):
    """Piecewise-linear parameterization given by a UV patch mesh."""

    name = "patch"

    def __init__(self, mesh: UvPatchMesh) -> None:
        self.mesh = mesh
        self._boundary = boundary_polygon(mesh)
        uv, xyz, faces = mesh.uv, mesh.vertices, mesh.faces
        e2 = np.stack([uv[faces[:, 1]] - uv[faces[:, 0]], uv[faces[:, 2]] - uv[faces[:, 0]]], axis=2)
        self.uv_inverse = np.linalg.inv(e2)
        e3 = np.stack([xyz[faces[:, 1]] - xyz[faces[:, 0]], xyz[faces[:, 2]] - xyz[faces[:, 0]]], axis=2)
        self.face_jacobians = e3 @ self.uv_inverse
        # gradient of the three barycentric coordinates w.r.t. uv, (m, 3, 2)
        g12 = self.uv_inverse
        self.bary_gradients = np.concatenate([-(g12[:, 0:1, :] + g12[:, 1:2, :]), g12], axis=1)
        self._grid = _FaceGrid(uv, faces)

    @property
    def boundary(self) -> BoundaryPolygon:
        return self._boundary

    def _bary(self, faces: np.ndarray, points: np.ndarray) -> np.ndarray:
        origin = self.mesh.uv[self.mesh.faces[faces, 0]]
        b12 = np.einsum("nij,nj->ni", self.uv_inverse[faces], points - origin)
        return np.column_stack([1.0 - b12.sum(axis=1), b12])

    def locate(self, uv) -> Tuple[np.ndarray, np.ndarray]:
        """
        Containing face and barycentric coordinates for each query.

        Raises:
            OutsideDomainError: a query lies outside the domain beyond the
                snap tolerance.
        """
        uv = np.atleast_2d(np.asarray(uv, dtype=float))
        faces = np.full(len(uv), -1, dtype=np.int64)
        bary = np.zeros((len(uv), 3))
        for i, point in enumerate(uv):
            cand = np.asarray(self._grid.candidates(point), dtype=np.int64)
            if len(cand):
                b = self._bary(cand, np.repeat(point[None], len(cand), axis=0))
                inside = np.flatnonzero(b.min(axis=1) >= -EDGE_TOLERANCE)
                if len(inside):
                    faces[i] = cand[inside[0]]
                    bary[i] = b[inside[0]]
                    continue
            faces[i], bary[i] = self._snap(point)
        return faces, bary

    def _snap(self, point: np.ndarray) -> Tuple[int, np.ndarray]:
        all_faces = np.arange(len(self.mesh.faces))
        b = self._bary(all_faces, np.repeat(point[None], len(all_faces), axis=0))
        best = int(np.argmax(b.min(axis=1)))
        d, _ = self._boundary.signed_distance(point[None])
        if d[0] < -SNAP_FACTOR * self._boundary.diagonal and b[best].min() < -EDGE_TOLERANCE:
            nearest = self._boundary.closest_points(point[None])[0]
            logger.error("point %s lies outside the patch domain", point.tolist())
            raise OutsideDomainError(
                f"point {point.tolist()} is outside the patch domain", point.copy(), nearest
            )
        clipped = np.clip(b[best], 0.0, None)
        return best, clipped / clipped.sum()

    def lift(self, uv):
        faces, bary = self.locate(uv)
        corners = self.mesh.vertices[self.mesh.faces[faces]]
        return np.einsum("ni,nij->nj", bary, corners)

    def jacobian(self, uv):
        faces, _ = self.locate(uv)
        return self.face_jacobians[faces]

    def forward(self, xyz):
        """Barycentric pull-back through the closest face."""
        xyz = np.atleast_2d(np.asarray(xyz, dtype=float))
        tri = self.mesh.vertices[self.mesh.faces]
        a = tri[:, 0]
        e1 = tri[:, 1] - a
        e2 = tri[:, 2] - a
        gram = np.stack([np.stack([np.sum(e1 * e1, 1), np.sum(e1 * e2, 1)], 1),
                         np.stack([np.sum(e1 * e2, 1), np.sum(e2 * e2, 1)], 1)], 1)
        gram_inv = np.linalg.inv(gram)
        out = np.zeros((len(xyz), 2))
        for i, p in enumerate(xyz):
            rel = p[None] - a
            rhs = np.column_stack([np.sum(rel * e1, 1), np.sum(rel * e2, 1)])
            b12 = np.einsum("nij,nj->ni", gram_inv, rhs)
            b = np.column_stack([1.0 - b12.sum(1), b12])
            b = np.clip(b, 0.0, None)
            b /= b.sum(axis=1, keepdims=True)
            proj = np.einsum("ni,nij->nj", b, tri)
            best = int(np.argmin(np.sum((proj - p) ** 2, axis=1)))
            out[i] = b[best] @ self.mesh.uv[self.mesh.faces[best]]
        return out

    def area_element(self, uv):
        faces, _ = self.locate(uv)
        return self._face_area_ratio()[faces]

    def _face_area_ratio(self) -> np.ndarray:
        tri = self.mesh.vertices[self.mesh.faces]
        area3 = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
        return area3 / self.mesh.uv_signed_areas()

    def max_area_element(self) -> float:
        return float(self._face_area_ratio().max())


def lift(par: Parameterization, v, strict: bool = True) -> np.ndarray:
    """
    Lift 2D points to the surface.

    Raises:
        OutsideDomainError: with `strict`, a point lies outside the domain.
    """
    v = np.atleast_2d(np.asarray(v, dtype=float))
    if strict:
        inside = par.contains(v)
        if not np.all(inside):
            bad = v[int(np.flatnonzero(~inside)[0])]
            nearest = par.boundary.closest_points(bad[None])[0]
            raise OutsideDomainError(f"point {bad.tolist()} is outside the domain", bad, nearest)
    return par.lift(v)


def lift_jacobian(par: Parameterization, v, strict: bool = True) -> np.ndarray:
    v = np.atleast_2d(np.asarray(v, dtype=float))
    if strict:
        lift(par, v, strict=True)
    return par.jacobian(v)


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------

class ScalarField(ABC):
    """Target area A sampled at 2D locations."""

    @abstractmethod
    def value(self, uv: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def gradient(self, uv: np.ndarray) -> np.ndarray:
        ...


class DirectionField(ABC):
    """Unit 3D direction field C sampled at 2D locations."""

    @abstractmethod
    def value(self, uv: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def jacobian(self, uv: np.ndarray) -> np.ndarray:
        """(n, 3, 2) derivative of C w.r.t. the 2D location."""

    def curvatures(self, uv: np.ndarray) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        return None


class ConstantArea(ScalarField):
    def __init__(self, area: float) -> None:
        if area <= 0:
            raise ValueError("target area must be positive")
        self.area = float(area)

    def value(self, uv):
        return np.full(len(np.atleast_2d(uv)), self.area)

    def gradient(self, uv):
        return np.zeros((len(np.atleast_2d(uv)), 2))


class CatenoidCurvatureArea(ScalarField):
    """A = scale * cosh^2 v, the reciprocal of the catenoid's mean absolute curvature."""

    def __init__(self, scale: float) -> None:
        self.scale = float(scale)

    def value(self, uv):
        v = np.atleast_2d(np.asarray(uv, dtype=float))[:, 1]
        return self.scale * np.cosh(v) ** 2

    def gradient(self, uv):
        v = np.atleast_2d(np.asarray(uv, dtype=float))[:, 1]
        g = np.zeros((len(v), 2))
        g[:, 1] = 2.0 * self.scale * np.cosh(v) * np.sinh(v)
        return g


class MeshArea(ScalarField):
    """Barycentric interpolation of per-vertex target areas."""

    def __init__(self, surface: PatchSurface, values: np.ndarray) -> None:
        self.surface = surface
        self.values = np.asarray(values, dtype=float)

    def value(self, uv):
        faces, bary = self.surface.locate(uv)
        return np.sum(bary * self.values[self.surface.mesh.faces[faces]], axis=1)

    def gradient(self, uv):
        faces, _ = self.surface.locate(uv)
        corner = self.values[self.surface.mesh.faces[faces]]
        return np.einsum("ni,nij->nj", corner, self.surface.bary_gradients[faces])


class ConstantDirection(DirectionField):
    def __init__(self, vector) -> None:
        vector = np.asarray(vector, dtype=float)
        norm = np.linalg.norm(vector)
        if norm == 0.0:
            raise ValueError("direction must be non-zero")
        self.vector = vector / norm

    def value(self, uv):
        return np.tile(self.vector, (len(np.atleast_2d(uv)), 1))

    def jacobian(self, uv):
        return np.zeros((len(np.atleast_2d(uv)), 3, 2))


class RotatingField(DirectionField):
    """C = (cos pi x, sin pi x, 0): a planar field rotating along x."""

    def value(self, uv):
        x = np.atleast_2d(np.asarray(uv, dtype=float))[:, 0]
        return np.column_stack([np.cos(np.pi * x), np.sin(np.pi * x), np.zeros_like(x)])

    def jacobian(self, uv):
        x = np.atleast_2d(np.asarray(uv, dtype=float))[:, 0]
        jac = np.zeros((len(x), 3, 2))
        jac[:, 0, 0] = -np.pi * np.sin(np.pi * x)
        jac[:, 1, 0] = np.pi * np.cos(np.pi * x)
        return jac


class CatenoidMeridianField(DirectionField):
    """Unit meridian direction (tanh v cos u, tanh v sin u, 1/cosh v)."""

    def value(self, uv):
        uv = np.atleast_2d(np.asarray(uv, dtype=float))
        u, v = uv[:, 0], uv[:, 1]
        return np.column_stack([np.tanh(v) * np.cos(u), np.tanh(v) * np.sin(u), 1.0 / np.cosh(v)])

    def jacobian(self, uv):
        uv = np.atleast_2d(np.asarray(uv, dtype=float))
        u, v = uv[:, 0], uv[:, 1]
        sech2 = 1.0 / np.cosh(v) ** 2
        jac = np.zeros((len(uv), 3, 2))
        jac[:, 0, 0] = -np.tanh(v) * np.sin(u)
        jac[:, 1, 0] = np.tanh(v) * np.cos(u)
        jac[:, 0, 1] = sech2 * np.cos(u)
        jac[:, 1, 1] = sech2 * np.sin(u)
        jac[:, 2, 1] = -np.tanh(v) / np.cosh(v)
        return jac

    def curvatures(self, uv):
        return Catenoid.curvatures(uv)


class MeshDirection(DirectionField):
    """Barycentric interpolation of per-vertex directions, renormalized."""

    def __init__(self, surface: PatchSurface, vectors: np.ndarray,
                 k1: Optional[np.ndarray] = None, k2: Optional[np.ndarray] = None) -> None:
        self.surface = surface
        self.vectors = np.asarray(vectors, dtype=float)
        self.k1 = None if k1 is None else np.asarray(k1, dtype=float)
        self.k2 = None if k2 is None else np.asarray(k2, dtype=float)

    def _raw(self, uv):
        faces, bary = self.surface.locate(uv)
        corner = self.vectors[self.surface.mesh.faces[faces]]
        return faces, bary, corner, np.einsum("ni,nij->nj", bary, corner)

    def value(self, uv):
        _, _, _, raw = self._raw(uv)
        norm = np.linalg.norm(raw, axis=1)
        if np.any(norm == 0.0):
            raise ValueError("interpolated direction vanishes")
        return raw / norm[:, None]

    def jacobian(self, uv):
        faces, _, corner, raw = self._raw(uv)
        norm = np.linalg.norm(raw, axis=1)
        unit = raw / norm[:, None]
        d_raw = np.einsum("nik,nij->nkj", corner, self.surface.bary_gradients[faces])
        proj = np.eye(3)[None] - unit[:, :, None] * unit[:, None, :]
        return np.einsum("nab,nbj->naj", proj, d_raw) / norm[:, None, None]

    def curvatures(self, uv):
        if self.k1 is None or self.k2 is None:
            return None
        faces, bary = self.surface.locate(uv)
        idx = self.surface.mesh.faces[faces]
        return np.sum(bary * self.k1[idx], axis=1), np.sum(bary * self.k2[idx], axis=1)


@dataclass
class FieldSet:
    """Target-area and direction fields of one run; either may be absent."""

    area: Optional[ScalarField] = None
    direction: Optional[DirectionField] = None

    def require_area(self) -> ScalarField:
        if self.area is None:
            raise ConfigurationError("this task needs a target-area field")
        return self.area

    def require_direction(self) -> DirectionField:
        if self.direction is None:
            raise ConfigurationError("this task needs a direction field")
        return self.direction


def mesh_fields(surface: PatchSurface) -> FieldSet:
    mesh = surface.mesh
    area = MeshArea(surface, mesh.area) if mesh.area is not None else None
    direction = MeshDirection(surface, mesh.direction, mesh.k1, mesh.k2) if mesh.direction is not None else None
    return FieldSet(area, direction)


def sample_field(surface: PatchSurface, name: str, v) -> np.ndarray:
    """
    Sample the patch's A or C field at 2D locations.

    Raises:
        ConfigurationError: the patch carries no such field.
        OutsideDomainError: a location is outside the patch.
    """
    fields = mesh_fields(surface)
    if name == "A":
        return fields.require_area().value(v)
    if name == "C":
        return fields.require_direction().value(v)
    raise ValueError(f"unknown field {name!r}; expected 'A' or 'C'")


# ---------------------------------------------------------------------------
# Tape primitives
# ---------------------------------------------------------------------------

def lift_op(tape: Tape, par: Parameterization, positions: Node) -> Node:
    """V' = m^-1(V); the vjp applies the per-point Jacobian transpose."""
    jac = par.jacobian(positions.value)
    return tape.apply("lift", par.lift(positions.value), (positions,),
                      lambda g: (np.einsum("nij,ni->nj", jac, g),))


def sample_area_op(tape: Tape, area: ScalarField, positions: Node) -> Node:
    grad = area.gradient(positions.value)
    return tape.apply("sample_area", area.value(positions.value), (positions,),
                      lambda g: (g[:, None] * grad,))


def sample_direction_op(tape: Tape, direction: DirectionField, positions: Node) -> Node:
    jac = direction.jacobian(positions.value)
    return tape.apply("sample_direction", direction.value(positions.value), (positions,),
                      lambda g: (np.einsum("nij,ni->nj", jac, g),))