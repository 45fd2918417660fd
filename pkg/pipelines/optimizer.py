#!/usr/bin/env python3
"""
optimizer.py

The optimization pipeline: build a run from its configuration (surface,
fields, loss weights, initial weighted points), iterate Adam over vertex
positions and weights with the soft triangulation rebuilt every iteration,
then extract, cut and lift the final triangulation.

Patches are independent runs; several can be optimized concurrently.

License: GPL-3.0
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import ConvexHull

from libs.config_manager import format_config
from libs.errors import ConfigurationError, NumericFailure
from libs.geom_core import WeightedPointSet
from libs.gradient_engine import GradientBundle, evaluate_with_gradient
from libs.losses import LossProblem, soft_expression
from libs.soft_dwdt import (
    DEFAULT_THRESHOLD,
    SoftTriangulation,
    branch_switches,
    extract_discrete,
    inclusion_scores,
)
from libs.surface_map import (
    Catenoid,
    CatenoidCurvatureArea,
    CatenoidMeridianField,
    ConstantArea,
    ConstantDirection,
    FieldSet,
    Parameterization,
    PatchSurface,
    PlaneSurface,
    RotatingField,
    UvPatchMesh,
    lift,
    mesh_fields,
    normalize_uv,
)
from libs.wdt_oracle import DiscreteMesh
from pipelines.adam import OptimizerState, adam_update
from pipelines.models import MetricsReport, RunConfig
from tools.boundary_cutter import cut_to_boundary
from tools.field_reader import read_fields
from tools.manifold_check import ManifoldReport, manifold_check
from tools.metrics import compute_metrics
from tools.obj_io import read_obj_patch, write_obj
from tools.report_writer import write_loss_csv, write_report
from tools.svg_writer import write_svg

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


# ---------------------------------------------------------------------------
# Run setup
# ---------------------------------------------------------------------------

@dataclass
class RunSetup:
    """Everything one optimization run needs, resolved from its RunConfig."""

    config: RunConfig
    surface: Parameterization
    fields: FieldSet
    problem: LossProblem
    initial: WeightedPointSet
    target_area: float
    name: str = "run"
    metadata: Dict[str, Any] = field(default_factory=dict)


def surface_area(surface: Parameterization) -> float:
    """3D area of the whole surface."""
    if isinstance(surface, PatchSurface):
        mesh = surface.mesh
        a, b, c = (mesh.vertices[mesh.faces[:, i]] for i in range(3))
        return float(0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1).sum())
    if isinstance(surface, Catenoid):
        def primitive(v):
            return 0.5 * v + 0.25 * np.sinh(2.0 * v)

        return float(2.0 * np.pi * (primitive(surface.v_max) - primitive(surface.v_min)))
    return float(surface.boundary.area)


def expected_face_count(positions: np.ndarray) -> int:
    """2n - 2 - h for n points with h on the convex hull."""
    n = len(positions)
    hull = ConvexHull(positions)
    return max(1, 2 * n - 2 - len(hull.vertices))


def load_patch(obj_path: PathLike, fields_path: Optional[PathLike] = None) -> UvPatchMesh:
    """Read a UV patch and attach a field table when one is given."""
    mesh = read_obj_patch(obj_path)
    if fields_path is None:
        return mesh
    table = read_fields(fields_path, len(mesh.vertices))
    return UvPatchMesh(mesh.vertices, mesh.uv, mesh.faces, table.area, table.direction, table.k1, table.k2,
                       dict(mesh.metadata))


def build_surface(config: RunConfig, input_path: Optional[PathLike] = None,
                  fields_path: Optional[PathLike] = None) -> Tuple[Parameterization, Dict[str, Any]]:
    metadata: Dict[str, Any] = {}
    if config.surface == "plane":
        return PlaneSurface(), metadata
    if config.surface == "catenoid":
        return Catenoid(), metadata
    path = input_path or config.input
    if path is None:
        raise ConfigurationError("surface 'patch' needs an input OBJ")
    mesh = load_patch(path, fields_path if fields_path is not None else config.fields)
    if config.normalize_uv:
        mesh, factor = normalize_uv(mesh, config.uv_edge_length)
        metadata["uv_scale"] = factor
    return PatchSurface(mesh), metadata


def build_fields(config: RunConfig, surface: Parameterization, target_area: float,
                 expected_faces: int) -> FieldSet:
    """
    Target-area and direction fields for the configured field kind.

    Raises:
        ConfigurationError: the field kind does not fit the surface.
    """
    kind = config.field
    if kind == "constant":
        return FieldSet(ConstantArea(target_area), ConstantDirection((1.0, 0.0, 0.0)))
    if kind == "rotating":
        return FieldSet(ConstantArea(target_area), RotatingField())
    if kind.startswith("catenoid"):
        if not isinstance(surface, Catenoid):
            raise ConfigurationError(f"field {kind!r} needs the catenoid surface")
        if kind == "catenoid-meridian":
            return FieldSet(ConstantArea(target_area), CatenoidMeridianField())
        # A = s cosh^2 v puts one face per s units of domain area
        scale = surface.boundary.area / expected_faces
        return FieldSet(CatenoidCurvatureArea(scale), CatenoidMeridianField())
    if not isinstance(surface, PatchSurface):
        raise ConfigurationError("field 'file' needs a patch surface")
    fields = mesh_fields(surface)
    if fields.area is None:
        fields = FieldSet(ConstantArea(target_area), fields.direction)
    return fields


def init_parameters(surface: Parameterization, mode: str = "random", n_vertices: int = 200,
                    seed: int = 0, weight_scale: float = 0.05) -> WeightedPointSet:
    """
    Initial positions and weights.

    Args:
        surface: the domain to initialize in.
        mode: uv (the patch's own UVs), random (uniform in the 2D domain) or
            uniform-surface (uniform over the lifted surface area).
        n_vertices: point count for the sampled modes.
        seed: seeds both positions and weights.
        weight_scale: weights are uniform in [0, weight_scale * domain diagonal].
    """
    rng = np.random.default_rng(seed)
    if mode == "uv":
        if not isinstance(surface, PatchSurface):
            raise ConfigurationError("init 'uv' needs a patch surface")
        positions = surface.mesh.uv.copy()
    elif mode == "random":
        positions = surface.sample_domain(n_vertices, rng)
    elif mode == "uniform-surface":
        positions = surface.sample_uniform(n_vertices, rng)
    else:
        raise ValueError(f"unknown init mode {mode!r}")
    diag = surface.boundary.diagonal
    weights = rng.uniform(0.0, weight_scale * diag, size=len(positions))
    return WeightedPointSet(positions, weights)


def build_setup(config: RunConfig, input_path: Optional[PathLike] = None,
                fields_path: Optional[PathLike] = None, name: str = "run") -> RunSetup:
    """
    Resolve a RunConfig into surface, fields, loss problem and initial points.

    Raises:
        ConfigurationError: the configuration cannot be realized.
        pydantic.ValidationError: no loss term carries a positive weight.
    """
    loss = config.loss_config()
    surface, metadata = build_surface(config, input_path, fields_path)
    initial = init_parameters(surface, config.init, config.n_vertices, config.seed, config.weight_init_scale)
    faces = expected_face_count(initial.positions)
    target = config.target_area or surface_area(surface) / faces
    fields = build_fields(config, surface, target, faces)
    problem = LossProblem(surface, fields, loss.term_weights(), loss.epsilon)
    metadata.update(expected_faces=faces, target_area=target, vertices=len(initial))
    logger.info("%s: %s surface, %d vertices, target area %.6g, terms %s", name, surface.name,
                len(initial), target, problem.active_terms())
    return RunSetup(config, surface, fields, problem, initial, target, name, metadata)


# ---------------------------------------------------------------------------
# Optimization loop
# ---------------------------------------------------------------------------

@dataclass
class StepResult:
    """Outcome of one Adam step. `soft`, `loss` and `terms` describe the input points."""

    points: WeightedPointSet
    soft: SoftTriangulation
    loss: float
    terms: Dict[str, float]
    gradient: GradientBundle


@dataclass
class Snapshot:
    iteration: int
    points: WeightedPointSet
    mesh: DiscreteMesh
    manifold: ManifoldReport


@dataclass
class RunLog:
    """Per-iteration losses and diagnostics of one run, plus optional snapshots."""

    rows: List[Dict[str, Any]] = field(default_factory=list)
    snapshots: List[Snapshot] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def append(self, row: Dict[str, Any]) -> None:
        if self.rows and row["iteration"] <= self.rows[-1]["iteration"]:
            raise ValueError("iteration indices must increase")
        self.rows.append(row)

    def totals(self) -> np.ndarray:
        return np.array([row["total"] for row in self.rows], dtype=float)

    def column(self, name: str) -> np.ndarray:
        return np.array([row.get(name, np.nan) for row in self.rows], dtype=float)

    def __len__(self) -> int:
        return len(self.rows)


def keep_inside(surface: Parameterization, positions: np.ndarray) -> np.ndarray:
    """Move points that left the domain onto its closest boundary point."""
    boundary = surface.boundary
    outside = ~boundary.contains(positions)
    if np.any(outside):
        positions = positions.copy()
        positions[outside] = boundary.closest_points(positions[outside])
        logger.debug("projected %d vertices back onto the boundary", int(np.count_nonzero(outside)))
    return positions


def step(state: OptimizerState, ps: WeightedPointSet, problem: LossProblem, alpha: float, k: int,
         threads: Optional[int] = None) -> StepResult:
    """
    One iteration: rebuild neighbours and candidates for `ps`, evaluate the
    loss with its gradient on the frozen branch and apply an Adam update.

    Raises:
        NumericFailure: the loss or its gradient is not finite.
    """
    soft = inclusion_scores(ps, alpha, k, threads)
    terms: Dict[str, float] = {}
    bundle = evaluate_with_gradient(soft_expression(soft, problem, terms), ps)
    if not bundle.is_finite():
        raise NumericFailure("non-finite loss or gradient", "loss")
    n = len(ps)
    params = np.concatenate([ps.positions.ravel(), ps.weights])
    updated = adam_update(state, params, bundle.flat())
    positions = keep_inside(problem.surface, updated[:2 * n].reshape(n, 2))
    return StepResult(WeightedPointSet(positions, updated[2 * n:]), soft, bundle.value, terms, bundle)


@dataclass
class FinalMeshes:
    soft: SoftTriangulation
    mesh2d: DiscreteMesh
    mesh3d: DiscreteMesh
    manifold: ManifoldReport


def finalize(setup: RunSetup, ps: WeightedPointSet) -> FinalMeshes:
    """
    Extract at the 0.5 threshold, cut patches along their boundary and lift
    to 3D.
    """
    config = setup.config
    soft = inclusion_scores(ps, config.alpha, config.k, config.threads)
    mesh2d = extract_discrete(soft, DEFAULT_THRESHOLD)
    if config.cut_boundary and isinstance(setup.surface, PatchSurface):
        mesh2d = cut_to_boundary(mesh2d, setup.surface.boundary)
    mesh3d = mesh2d.with_vertices(lift(setup.surface, mesh2d.vertices))
    report = manifold_check(mesh2d)
    if not report.is_manifold:
        logger.warning("%s: extracted mesh is not manifold: %s", setup.name, report.summary())
    return FinalMeshes(soft, mesh2d, mesh3d, report)


def evaluate_mesh(setup: RunSetup, meshes: FinalMeshes) -> MetricsReport:
    """Metrics of a final mesh against the run's fields, sampled at its 2D vertices."""
    uv = meshes.mesh2d.vertices
    target = setup.fields.area.value(uv) if setup.fields.area is not None else None
    directions = k1 = k2 = None
    if setup.fields.direction is not None:
        directions = setup.fields.direction.value(uv)
        curvatures = setup.fields.direction.curvatures(uv)
        if curvatures is not None:
            k1, k2 = curvatures
    return MetricsReport.from_values(compute_metrics(meshes.mesh3d, target, directions, k1, k2))


@dataclass
class OptimizationResult:
    setup: RunSetup
    points: WeightedPointSet
    initial: FinalMeshes
    final: FinalMeshes
    log: RunLog
    initial_metrics: MetricsReport
    final_metrics: MetricsReport

    @property
    def mesh2d(self) -> DiscreteMesh:
        return self.final.mesh2d

    @property
    def mesh3d(self) -> DiscreteMesh:
        return self.final.mesh3d


def optimize(setup: RunSetup, iterations: Optional[int] = None) -> OptimizationResult:
    """
    Run Adam for `iterations` steps (the configured count by default).

    Returns:
        OptimizationResult with the initial and final meshes, their metrics
        and the run log.

    Raises:
        NumericFailure: a non-finite loss or gradient; its `snapshot` holds
            the last finite point set.
    """
    config = setup.config
    iterations = config.iterations if iterations is None else iterations
    ps = setup.initial
    state = OptimizerState(3 * len(ps), config.lr, config.beta1, config.beta2, config.eps_adam)
    log = RunLog(metadata=dict(setup.metadata, name=setup.name, iterations=iterations))
    initial = finalize(setup, ps)
    initial_metrics = evaluate_mesh(setup, initial)
    previous: Optional[SoftTriangulation] = None
    started = time.perf_counter()

    for iteration in range(iterations):
        try:
            result = step(state, ps, setup.problem, config.alpha, config.k, config.threads)
        except NumericFailure as exc:
            logger.error("%s: numeric failure at iteration %d (%s)", setup.name, iteration, exc)
            raise NumericFailure(f"iteration {iteration}: {exc}", exc.primitive, snapshot=ps) from exc
        soft = result.soft
        switches = branch_switches(previous, soft) if previous is not None else 0
        faces = int(np.count_nonzero(soft.scores > DEFAULT_THRESHOLD))
        row = {"iteration": iteration, "total": result.loss}
        row.update(result.terms)
        row.update(branch_switches=switches, candidates=len(soft), faces=faces)
        log.append(row)
        if iteration % config.log_every == 0:
            logger.info("%s it %d: loss %.6g %s, %d candidates, %d faces, %d switches", setup.name, iteration,
                        result.loss, {k: round(v, 6) for k, v in result.terms.items()}, len(soft), faces,
                        switches)
        if config.snapshot_every and iteration % config.snapshot_every == 0:
            mesh = extract_discrete(soft)
            report = manifold_check(mesh)
            if not report.is_manifold:
                logger.warning("%s: snapshot %d is not manifold: %s", setup.name, iteration, report.summary())
            log.snapshots.append(Snapshot(iteration, ps, mesh, report))
        previous = soft
        ps = result.points

    log.metadata["seconds"] = time.perf_counter() - started
    final = finalize(setup, ps)
    final_metrics = evaluate_mesh(setup, final)
    logger.info("%s: done, %d faces, manifold=%s", setup.name, len(final.mesh2d.faces), final.manifold.is_manifold)
    return OptimizationResult(setup, ps, initial, final, log, initial_metrics, final_metrics)


def optimize_patches(configs: Sequence[Tuple[str, RunConfig, PathLike, Optional[PathLike]]],
                     workers: int = 1) -> List[OptimizationResult]:
    """
    Optimize independent patches concurrently.

    Args:
        configs: (name, config, OBJ path, fields path or None) per patch.
        workers: thread cap.
    """

    def run(item):
        name, config, obj_path, fields_path = item
        return optimize(build_setup(config, obj_path, fields_path, name))

    workers = max(1, min(workers, len(configs)))
    if workers == 1:
        return [run(item) for item in configs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, configs))


def patch_inputs(directory: PathLike) -> List[Tuple[str, Path, Optional[Path]]]:
    """Every *.obj in a directory with its <stem>.fields table when present."""
    items = []
    for obj in sorted(Path(directory).glob("*.obj")):
        table = obj.with_suffix(".fields")
        items.append((obj.stem, obj, table if table.exists() else None))
    if not items:
        raise ConfigurationError(f"no .obj patches in {directory}")
    return items


# ---------------------------------------------------------------------------
# Outputs
# ---------------------------------------------------------------------------

def write_run_outputs(result: OptimizationResult, output_dir: PathLike) -> Path:
    """
    Write initial and final meshes, snapshots, the loss CSV, the metrics
    report and the run metadata.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    boundary = result.setup.surface.boundary
    write_obj(result.initial.mesh3d, out / "initial.obj", only_used=True)
    write_svg(result.initial.soft, out / "initial_soft.svg", boundary)
    write_obj(result.final.mesh3d, out / "final.obj", only_used=True)
    write_obj(result.final.mesh2d, out / "final_2d.obj", only_used=True)
    write_svg(result.final.soft, out / "final_soft.svg", boundary)
    write_svg(result.final.mesh2d, out / "final_2d.svg", boundary)
    if result.log.snapshots:
        snap_dir = out / "snapshots"
        snap_dir.mkdir(exist_ok=True)
        for snap in result.log.snapshots:
            write_svg(snap.mesh, snap_dir / f"iter_{snap.iteration:06d}.svg", boundary)
            write_obj(snap.mesh, snap_dir / f"iter_{snap.iteration:06d}.obj")
    write_loss_csv(out / "loss.csv", result.log.rows)
    metrics = {f"initial_{k}": v for k, v in result.initial_metrics.as_dict().items()}
    metrics.update({f"final_{k}": v for k, v in result.final_metrics.as_dict().items()})
    metrics["manifold"] = result.final.manifold.is_manifold
    write_report(out / "metrics.txt", metrics)
    run = dict(result.setup.config.model_dump())
    run.update(result.log.metadata)
    (out / "run.txt").write_text(format_config(run))
    logger.info("wrote outputs to %s", out)
    return out
