#!/usr/bin/env python3
"""
obj_io.py

Reading and writing the OBJ subset used for patches and result meshes:
`v x y z`, `vt u v` and triangular `f` records (`f a b c` or `f a/ta b/tb c/tc`).
Indices are 1-based; negative indices count back from the latest record.

License: GPL-3.0
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from libs.errors import InvalidPatchError, MeshFormatError
from libs.surface_map import UvPatchMesh
from libs.wdt_oracle import DiscreteMesh

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _resolve(token: str, count: int, path: str, line: int) -> int:
    try:
        idx = int(token)
    except ValueError:
        raise MeshFormatError(f"bad index {token!r}", path, line)
    if idx == 0:
        raise MeshFormatError("OBJ indices start at 1", path, line)
    resolved = idx - 1 if idx > 0 else count + idx
    if not 0 <= resolved < count:
        raise MeshFormatError(f"index {idx} out of range (have {count})", path, line)
    return resolved


def _floats(parts: List[str], count: int, path: str, line: int) -> List[float]:
    if len(parts) < count:
        raise MeshFormatError(f"expected {count} coordinates", path, line)
    try:
        return [float(p) for p in parts[:count]]
    except ValueError:
        raise MeshFormatError(f"non-numeric coordinate in {' '.join(parts)!r}", path, line)


def _parse(path: PathLike):
    """Raw v, vt and face records with the line number of every face."""
    source = str(path)
    vertices: List[List[float]] = []
    uvs: List[List[float]] = []
    faces: List[Tuple[List[int], Optional[List[int]]]] = []
    lines: List[int] = []
    with open(path) as handle:
        for number, raw in enumerate(handle, start=1):
            parts = raw.split("#", 1)[0].split()
            if not parts:
                continue
            tag, rest = parts[0], parts[1:]
            if tag == "v":
                vertices.append(_floats(rest, 3, source, number))
            elif tag == "vt":
                uvs.append(_floats(rest, 2, source, number))
            elif tag == "f":
                if len(rest) != 3:
                    raise MeshFormatError(f"only triangles are supported, got {len(rest)} corners",
                                          source, number)
                v_idx, t_idx = [], []
                for corner in rest:
                    fields = corner.split("/")
                    v_idx.append(_resolve(fields[0], len(vertices), source, number))
                    if len(fields) > 1 and fields[1]:
                        t_idx.append(_resolve(fields[1], len(uvs), source, number))
                if t_idx and len(t_idx) != 3:
                    raise MeshFormatError("face mixes corners with and without UVs", source, number)
                faces.append((v_idx, t_idx or None))
                lines.append(number)
            # other records (vn, o, g, s, usemtl, mtllib) are ignored
    return vertices, uvs, faces, lines


def _check_manifold_edges(faces: np.ndarray, lines: List[int], source: str) -> None:
    seen: Dict[Tuple[int, int], int] = {}
    for f, number in zip(faces, lines):
        for a, b in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
            key = (min(int(a), int(b)), max(int(a), int(b)))
            seen[key] = seen.get(key, 0) + 1
            if seen[key] > 2:
                raise MeshFormatError(f"edge {key} is shared by more than two faces", source, number)


def read_obj_patch(path: PathLike) -> UvPatchMesh:
    """
    Read a UV-mapped patch.

    Every vertex must be bound to exactly one texture coordinate, either
    through consistent `v/vt` pairs or, when faces carry no UV indices, by
    having as many `vt` as `v` records.

    Raises:
        MeshFormatError: malformed records, missing or inconsistent UVs,
            non-manifold edges or degenerate UV faces (with line numbers).
    """
    source = str(path)
    vertices, uvs, faces, lines = _parse(path)
    if not faces:
        raise MeshFormatError("no faces", source, 0)
    if not uvs:
        raise MeshFormatError("patch has no texture coordinates", source, 0)

    binding = np.full(len(vertices), -1, dtype=np.int64)
    for (v_idx, t_idx), number in zip(faces, lines):
        if t_idx is None:
            if len(uvs) != len(vertices):
                raise MeshFormatError("face without UV indices and vt count differs from v count",
                                      source, number)
            t_idx = v_idx
        for v, t in zip(v_idx, t_idx):
            if binding[v] == -1:
                binding[v] = t
            elif binding[v] != t:
                raise MeshFormatError(
                    f"vertex {v + 1} paired with texture coordinates {binding[v] + 1} and {t + 1}",
                    source, number,
                )

    used = binding >= 0
    if not np.all(used):
        logger.warning("%s: %d vertices are not referenced by any face", source, int(np.count_nonzero(~used)))
    # compact to referenced vertices so every vertex has a UV
    remap = np.full(len(vertices), -1, dtype=np.int64)
    remap[used] = np.arange(int(np.count_nonzero(used)))
    face_arr = remap[np.array([f[0] for f in faces], dtype=np.int64)]
    xyz = np.asarray(vertices, dtype=float)[used]
    uv = np.asarray(uvs, dtype=float)[binding[used]]

    _check_manifold_edges(face_arr, lines, source)
    a, b, c = uv[face_arr[:, 0]], uv[face_arr[:, 1]], uv[face_arr[:, 2]]
    signed = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    scale = float(np.ptp(uv, axis=0).max()) ** 2
    degenerate = np.flatnonzero(np.abs(signed) <= 1e-14 * scale)
    if len(degenerate):
        raise MeshFormatError("degenerate UV face", source, lines[int(degenerate[0])])
    try:
        mesh = UvPatchMesh(xyz, uv, face_arr)
    except InvalidPatchError as exc:
        logger.error("%s: invalid patch: %s", source, exc)
        raise MeshFormatError(str(exc), source, 0) from exc
    logger.info("read patch %s: %d vertices, %d faces", source, len(xyz), len(face_arr))
    return mesh


def read_obj_mesh(path: PathLike) -> DiscreteMesh:
    """Read a plain triangle mesh (UVs ignored)."""
    source = str(path)
    vertices, _, faces, lines = _parse(path)
    face_arr = np.array([f[0] for f in faces], dtype=np.int64).reshape(-1, 3)
    _check_manifold_edges(face_arr, lines, source)
    return DiscreteMesh(np.asarray(vertices, dtype=float).reshape(-1, 3), face_arr)


def write_obj(mesh: DiscreteMesh, path: PathLike, uv: Optional[np.ndarray] = None,
              only_used: bool = False) -> None:
    """
    Write a mesh; 2D vertices get z = 0. With `uv`, every vertex also gets a
    `vt` record and faces are written as `a/a`.
    """
    vertices = mesh.vertices
    faces = mesh.faces
    if only_used:
        keep = np.flatnonzero(mesh.used)
        remap = np.full(len(vertices), -1, dtype=np.int64)
        remap[keep] = np.arange(len(keep))
        vertices = vertices[keep]
        faces = remap[faces]
        uv = uv[keep] if uv is not None else None
    if vertices.shape[1] == 2:
        vertices = np.column_stack([vertices, np.zeros(len(vertices))])

    lines = [f"v {_fmt(x)} {_fmt(y)} {_fmt(z)}" for x, y, z in vertices]
    if uv is not None:
        lines += [f"vt {_fmt(u)} {_fmt(v)}" for u, v in uv]
        lines += [f"f {a + 1}/{a + 1} {b + 1}/{b + 1} {c + 1}/{c + 1}" for a, b, c in faces]
    else:
        lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in faces]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))
    logger.debug("wrote %s: %d vertices, %d faces", path, len(vertices), len(faces))


def write_patch_obj(mesh: UvPatchMesh, path: PathLike) -> None:
    write_obj(DiscreteMesh(mesh.vertices, mesh.faces), path, uv=mesh.uv)
