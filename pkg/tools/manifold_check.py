#!/usr/bin/env python3
"""
manifold_check.py

Topological validation of triangle meshes: edges with more than two faces,
orientation conflicts across shared edges, pinched vertex stars, duplicate
faces and used vertices that no face references.

License: GPL-3.0
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Set, Tuple

import numpy as np

from libs.wdt_oracle import DiscreteMesh

logger = logging.getLogger(__name__)


@dataclass
class ManifoldReport:
    """Everything that keeps a mesh from being a manifold with boundary."""

    overloaded_edges: List[Tuple[int, int]] = field(default_factory=list)
    orientation_conflicts: List[Tuple[int, int]] = field(default_factory=list)
    nonmanifold_vertices: List[int] = field(default_factory=list)
    isolated_used_vertices: List[int] = field(default_factory=list)
    duplicate_faces: List[Tuple[int, int, int]] = field(default_factory=list)
    out_of_range_faces: List[int] = field(default_factory=list)

    @property
    def is_manifold(self) -> bool:
        return not any((self.overloaded_edges, self.orientation_conflicts, self.nonmanifold_vertices,
                        self.isolated_used_vertices, self.duplicate_faces, self.out_of_range_faces))

    def summary(self) -> str:
        if self.is_manifold:
            return "manifold"
        parts = []
        for name in ("overloaded_edges", "orientation_conflicts", "nonmanifold_vertices",
                     "isolated_used_vertices", "duplicate_faces", "out_of_range_faces"):
            items = getattr(self, name)
            if items:
                parts.append(f"{name}={len(items)}")
        return "non-manifold: " + ", ".join(parts)


def _star_is_disk(link: List[Tuple[int, int]]) -> bool:
    """A vertex star is a disk or half-disk iff its link is one path or one cycle."""
    adjacency: Dict[int, Set[int]] = defaultdict(set)
    for a, b in link:
        adjacency[a].add(b)
        adjacency[b].add(a)
    if any(len(n) > 2 for n in adjacency.values()):
        return False
    start = next(iter(adjacency))
    seen = {start}
    stack = [start]
    while stack:
        for nxt in adjacency[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return len(seen) == len(adjacency)


def manifold_check(mesh: DiscreteMesh) -> ManifoldReport:
    """
    Check a mesh; an empty report means manifold with boundary.

    Args:
        mesh: 2D or 3D mesh.

    Returns:
        ManifoldReport listing every violation found.
    """
    report = ManifoldReport()
    faces = mesh.faces
    n = len(mesh.vertices)
    if len(faces) == 0:
        report.isolated_used_vertices = [int(i) for i in np.flatnonzero(mesh.used)]
        return report

    bad_range = np.flatnonzero((faces < 0).any(axis=1) | (faces >= n).any(axis=1))
    report.out_of_range_faces = [int(i) for i in bad_range]
    if len(bad_range):
        return report

    seen_faces: Set[Tuple[int, int, int]] = set()
    directed: Dict[Tuple[int, int], int] = defaultdict(int)
    undirected: Dict[Tuple[int, int], int] = defaultdict(int)
    links: Dict[int, List[Tuple[int, int]]] = defaultdict(list)
    for f in faces:
        a, b, c = (int(i) for i in f)
        key = tuple(sorted((a, b, c)))
        if key in seen_faces:
            report.duplicate_faces.append(key)
        seen_faces.add(key)
        for u, v, w in ((a, b, c), (b, c, a), (c, a, b)):
            directed[(u, v)] += 1
            undirected[(min(u, v), max(u, v))] += 1
            links[w].append((u, v))

    report.overloaded_edges = sorted(e for e, count in undirected.items() if count > 2)
    report.orientation_conflicts = sorted(e for e, count in directed.items() if count > 1)
    report.nonmanifold_vertices = sorted(v for v, link in links.items() if not _star_is_disk(link))
    referenced = np.zeros(n, dtype=bool)
    referenced[faces.ravel()] = True
    report.isolated_used_vertices = [int(i) for i in np.flatnonzero(mesh.used & ~referenced)]
    if not report.is_manifold:
        logger.debug("manifold check: %s", report.summary())
    return report
