#!/usr/bin/env python3
"""
demos.py

Canned desk-scale experiments:

    catenoid-equal      equal triangle sizes on the catenoid
    catenoid-curvature  triangle sizes following the catenoid's curvature
    square-align        edges aligned with a rotating field on the unit square
    square-size         uniform triangle sizes on the unit square
    blend-sweep         angle/size trade-off for t in 0, 0.25, 0.5, 0.75, 1
    vertex-exclusion    a low-weight centre vertex inside a heavy square

License: GPL-3.0
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from libs.errors import AmbiguousConfigurationError
from libs.geom_core import WeightedPointSet
from libs.soft_dwdt import DEFAULT_THRESHOLD, inclusion_scores
from libs.wdt_oracle import vertex_is_redundant
from pipelines.annealing import anneal
from pipelines.models import MetricsReport, RunConfig, resolve_config
from pipelines.optimizer import build_setup, evaluate_mesh, optimize, write_run_outputs

logger = logging.getLogger(__name__)

BLEND_STEPS = (0.0, 0.25, 0.5, 0.75, 1.0)
# square corners carry distinct heavy weights so their quad has a unique split
EXCLUSION_CORNERS = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
EXCLUSION_CORNER_WEIGHTS_SQ = np.array([0.75, 0.76, 0.77, 0.78])
EXCLUSION_CENTER = np.array([0.45, 0.4])
BISECTION_TOLERANCE = 1e-6

SUMMARY_KEYS = ("vertices", "faces", "angle_mean", "angle_std", "area_cv", "size_rmse", "alignment_error",
                "curvature_alignment_error")


@dataclass
class DemoResult:
    """Columns of comparable values, keyed by column name."""

    name: str
    columns: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    rows: List[Dict[str, Any]] = field(default_factory=list)


def _summary(report: MetricsReport) -> Dict[str, Any]:
    values = report.as_dict()
    return {k: values[k] for k in SUMMARY_KEYS if values.get(k) is not None}


def demo_config(task: str, overrides: Optional[Dict[str, Any]] = None, **fixed) -> RunConfig:
    """Demo settings layered over the task preset; explicit overrides win."""
    values = dict(fixed)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return resolve_config(task, overrides=values)


def _optimize_demo(name: str, config: RunConfig, output_dir: Optional[Path]) -> DemoResult:
    result = optimize(build_setup(config, name=name))
    if output_dir is not None:
        write_run_outputs(result, output_dir / name)
    return DemoResult(name, {"initial": _summary(result.initial_metrics), "final": _summary(result.final_metrics)})


def catenoid_equal(overrides=None, output_dir=None) -> DemoResult:
    config = demo_config("size", overrides, surface="catenoid", field="constant", init="random")
    return _optimize_demo("catenoid-equal", config, output_dir)


def catenoid_curvature(overrides=None, output_dir=None) -> DemoResult:
    config = demo_config("size", overrides, surface="catenoid", field="catenoid-curvature", init="random")
    return _optimize_demo("catenoid-curvature", config, output_dir)


def square_size(overrides=None, output_dir=None) -> DemoResult:
    config = demo_config("size", overrides, surface="plane", field="constant", init="random")
    return _optimize_demo("square-size", config, output_dir)


def square_align(overrides=None, output_dir=None) -> DemoResult:
    """Adam on the rotating field; with baseline 'sa' the annealer runs the same number of proposals."""
    config = demo_config("align", overrides, surface="plane", field="rotating", init="random")
    setup = build_setup(config, name="square-align")
    result = optimize(setup)
    if output_dir is not None:
        write_run_outputs(result, output_dir / "square-align")
    demo = DemoResult("square-align", {"initial": _summary(result.initial_metrics),
                                       "adam": _summary(result.final_metrics)})
    if config.baseline == "sa":
        final, _ = anneal(setup)
        demo.columns["sa"] = _summary(evaluate_mesh(setup, final))
    return demo


def blend_sweep(overrides=None, output_dir=None) -> DemoResult:
    """One instance optimized for each t; angle spread should shrink and size error grow with t."""
    demo = DemoResult("blend-sweep")
    for t in BLEND_STEPS:
        config = demo_config("blend", overrides, surface="plane", field="constant", init="random", blend_t=t)
        result = optimize(build_setup(config, name=f"blend t={t:g}"))
        if output_dir is not None:
            write_run_outputs(result, output_dir / "blend-sweep" / f"t_{t:g}")
        summary = _summary(result.final_metrics)
        demo.columns[f"t={t:g}"] = summary
        demo.rows.append({"t": t, "angle_std": summary.get("angle_std"), "size_rmse": summary.get("size_rmse")})
    return demo


def exclusion_points(center_weight: float) -> WeightedPointSet:
    """The four heavy square corners plus the centre vertex (index 4)."""
    positions = np.vstack([EXCLUSION_CORNERS, EXCLUSION_CENTER])
    weights = np.append(np.sqrt(EXCLUSION_CORNER_WEIGHTS_SQ), center_weight)
    return WeightedPointSet(positions, weights)


def center_score(center_weight: float, alpha: float = 1000.0) -> float:
    """Largest soft score of a triangle incident to the centre vertex."""
    ps = exclusion_points(center_weight)
    soft = inclusion_scores(ps, alpha, k=len(ps) - 1, threads=1)
    incident = np.any(soft.triples == 4, axis=1)
    return float(soft.scores[incident].max()) if np.any(incident) else 0.0


def center_redundant(center_weight: float) -> bool:
    return vertex_is_redundant(exclusion_points(center_weight), 4)


def bisect(predicate: Callable[[float], bool], lo: float, hi: float,
           tolerance: float = BISECTION_TOLERANCE) -> float:
    """
    Crossing point of a predicate that is False at `lo` and True at `hi`.
    Ambiguous evaluations (exactly at the crossing) end the search.
    """
    if predicate(lo) or not predicate(hi):
        raise ValueError("predicate must be False at lo and True at hi")
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        try:
            if predicate(mid):
                hi = mid
            else:
                lo = mid
        except AmbiguousConfigurationError:
            return mid
    return 0.5 * (lo + hi)


def exclusion_crossings(alpha: float = 1000.0, lo: float = 0.0, hi: float = 1.0) -> Tuple[float, float]:
    """
    Centre weights at which the oracle stops calling the centre redundant and
    at which its best soft triangle score reaches 0.5.
    """
    oracle = bisect(lambda w: not center_redundant(w), lo, hi)
    soft = bisect(lambda w: center_score(w, alpha) > DEFAULT_THRESHOLD, lo, hi)
    return oracle, soft


def vertex_exclusion(overrides=None, output_dir=None) -> DemoResult:
    alpha = float((overrides or {}).get("alpha") or 1000.0)
    demo = DemoResult("vertex-exclusion")
    for w in np.linspace(0.0, 1.0, 21):
        try:
            redundant: Any = center_redundant(float(w))
        except AmbiguousConfigurationError:
            redundant = "ambiguous"
        demo.rows.append({"center_weight": float(w), "redundant": redundant,
                          "center_score": center_score(float(w), alpha)})
    oracle, soft = exclusion_crossings(alpha)
    demo.columns["crossing"] = {"oracle_weight": oracle, "soft_weight": soft, "difference": abs(oracle - soft)}
    logger.info("vertex exclusion: oracle flips at %.6f, soft score crosses 0.5 at %.6f", oracle, soft)
    return demo


DEMOS: Dict[str, Callable[..., DemoResult]] = {
    "catenoid-equal": catenoid_equal,
    "catenoid-curvature": catenoid_curvature,
    "square-align": square_align,
    "square-size": square_size,
    "blend-sweep": blend_sweep,
    "vertex-exclusion": vertex_exclusion,
}


def run_demo(name: str, overrides: Optional[Dict[str, Any]] = None,
             output_dir: Optional[Path] = None) -> DemoResult:
    """
    Raises:
        ValueError: unknown demo name.
    """
    if name not in DEMOS:
        raise ValueError(f"unknown demo {name!r}; choose from {sorted(DEMOS)}")
    logger.info("running demo %s", name)
    return DEMOS[name](overrides, Path(output_dir) if output_dir is not None else None)
