#!/usr/bin/env python3
"""
svg_writer.py

SVG renderings of soft and discrete 2D triangulations, drawn with matplotlib.
Soft triangulations draw every triangle scoring above 0.001 with opacity
equal to its score and colour each edge by the largest score of its adjacent
triangles.

License: GPL-3.0
"""

import io
import logging
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
from matplotlib import rc_context
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.collections import LineCollection, PolyCollection
from matplotlib.colors import LinearSegmentedColormap, to_hex, to_rgba
from matplotlib.figure import Figure

from libs.soft_dwdt import SoftTriangulation
from libs.surface_map import BoundaryPolygon
from libs.wdt_oracle import DiscreteMesh

logger = logging.getLogger(__name__)

DRAW_THRESHOLD = 1e-3
FIGURE_INCHES = 8.0
FACE_COLOUR = "#f0b060"
BOUNDARY_COLOUR = "#3060c0"

# light grey at 0 through dark red at 1
SCORE_CMAP = LinearSegmentedColormap.from_list("score", ["#dcdcdc", "#961414"])


def _score_colour(score: float) -> str:
    return to_hex(SCORE_CMAP(float(np.clip(score, 0.0, 1.0))))


def _edge_scores(triples: np.ndarray, scores: np.ndarray, drawn: np.ndarray) -> Dict[Tuple[int, int], float]:
    edge_score: Dict[Tuple[int, int], float] = {}
    for i in drawn:
        t = triples[i]
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            key = (int(min(a, b)), int(max(a, b)))
            edge_score[key] = max(edge_score.get(key, 0.0), float(scores[i]))
    return edge_score


def build_figure(item: Union[SoftTriangulation, DiscreteMesh], boundary: Optional[BoundaryPolygon] = None,
                 vertex_values: Optional[np.ndarray] = None) -> Figure:
    """
    A matplotlib figure of a soft triangulation or a 2D mesh.

    The axes hold, in order, a PolyCollection of the drawn triangles, a
    LineCollection of their edges and the vertex scatter; the boundary, when
    given, is a line on the same axes.

    Args:
        item: what to draw.
        boundary: optional domain outline.
        vertex_values: optional per-vertex scalars used to colour vertex dots.
    """
    if isinstance(item, SoftTriangulation):
        points = item.points.positions
        triples = item.triples
        scores = item.scores
    else:
        points = item.vertices[:, :2]
        triples = item.faces
        scores = np.ones(len(triples))

    fig = Figure(figsize=(FIGURE_INCHES, FIGURE_INCHES))
    FigureCanvasSVG(fig)
    ax = fig.add_subplot(1, 1, 1)

    drawn = np.flatnonzero(scores > DRAW_THRESHOLD)
    face_colours = np.tile(to_rgba(FACE_COLOUR), (len(drawn), 1))
    face_colours[:, 3] = np.clip(scores[drawn], 0.0, 1.0)
    ax.add_collection(PolyCollection([points[triples[i]] for i in drawn], facecolors=face_colours,
                                     edgecolors="none"))

    edge_score = _edge_scores(triples, scores, drawn)
    keys = sorted(edge_score)
    edges = LineCollection([points[[a, b]] for a, b in keys], linewidths=0.8,
                           colors=[SCORE_CMAP(edge_score[k]) for k in keys])
    ax.add_collection(edges)

    if vertex_values is not None and len(vertex_values):
        ax.scatter(points[:, 0], points[:, 1], s=4, c=np.asarray(vertex_values, dtype=float), cmap=SCORE_CMAP)
    else:
        ax.scatter(points[:, 0], points[:, 1], s=4, c="#202020")

    if boundary is not None:
        ring = np.vstack([boundary.vertices, boundary.vertices[:1]])
        ax.plot(ring[:, 0], ring[:, 1], color=BOUNDARY_COLOUR, linewidth=1.5)

    ax.set_aspect("equal")
    ax.autoscale_view()
    ax.set_axis_off()
    return fig


def render(item: Union[SoftTriangulation, DiscreteMesh], boundary: Optional[BoundaryPolygon] = None,
           vertex_values: Optional[np.ndarray] = None) -> str:
    """SVG text of build_figure; ids and metadata are fixed so equal inputs give equal files."""
    fig = build_figure(item, boundary, vertex_values)
    buffer = io.StringIO()
    with rc_context({"svg.hashsalt": "dwdt", "svg.fonttype": "none"}):
        fig.savefig(buffer, format="svg", bbox_inches="tight", metadata={"Date": None})
    return buffer.getvalue()


def write_svg(item: Union[SoftTriangulation, DiscreteMesh], path: Union[str, Path],
              boundary: Optional[BoundaryPolygon] = None, vertex_values: Optional[np.ndarray] = None) -> None:
    Path(path).write_text(render(item, boundary, vertex_values))
    logger.debug("wrote %s", path)
