#!/usr/bin/env python3
"""
orchestrator.py

Command-line entry point. Subcommands:

    triangulate  soft triangulation of a point file or patch, with its extraction
    optimize     run a task (size, align, blend, custom) on a surface or patches
    oracle       compare extraction against the brute-force weighted triangulation
    gradcheck    finite-difference check of every loss gradient
    metrics      evaluation measures of an OBJ mesh against a field table
    export       SVG/OBJ conversion of point files and patches
    demo         canned experiments

Exit codes: 0 success, 1 validation error, 2 numeric failure, 3 oracle
mismatch or gradcheck failure.

License: GPL-3.0
"""

import argparse
import logging
import sys
import typing
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from libs.config_manager import env_log_level, load_environment, parse_value
from libs.errors import AmbiguousConfigurationError, DwdtError, NumericFailure
from libs.geom_core import WeightedPointSet
from libs.soft_dwdt import DEFAULT_THRESHOLD, extract_discrete, inclusion_scores
from libs.wdt_oracle import DiscreteMesh, brute_force_wdt
from pipelines.annealing import anneal
from pipelines.demos import DEMOS, run_demo
from pipelines.gradcheck import SURFACES, run_gradcheck
from pipelines.models import MetricsReport, RunConfig, resolve_config
from pipelines.optimizer import (
    build_setup,
    evaluate_mesh,
    optimize,
    optimize_patches,
    patch_inputs,
    write_run_outputs,
)
from tools.field_reader import read_fields, read_point_set, write_point_set
from tools.metrics import NORMALIZATION_MODES, compute_metrics
from tools.obj_io import read_obj_mesh, read_obj_patch, write_obj
from tools.report_writer import format_side_by_side, format_table, write_report
from tools.svg_writer import write_svg

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERIC = 2
EXIT_MISMATCH = 3

FLAG_ALIASES = {"iterations": ["--iters"], "blend_t": ["--t"]}
FLAG_SOURCES = {
    "alpha": "sigmoid sharpness",
    "k": "candidate neighbours",
    "epsilon": "boundary margin",
    "lr": "Adam learning rate",
}


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _flag_type(annotation):
    """argparse type and choices for a RunConfig field annotation."""
    args = [a for a in typing.get_args(annotation) if a is not type(None)]
    if typing.get_origin(annotation) is typing.Literal:
        return str, list(typing.get_args(annotation))
    if args and typing.get_origin(args[0]) is typing.Literal:
        return str, list(typing.get_args(args[0]))
    base = args[0] if args else annotation
    if base is bool:
        return _boolean, None
    if base in (int, float, str):
        return base, None
    return str, None


def _boolean(text: str) -> bool:
    value = parse_value(text)
    if not isinstance(value, bool):
        raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")
    return value


def add_config_flags(parser: argparse.ArgumentParser, skip: Sequence[str] = ()) -> None:
    """One flag per RunConfig key; all default to None so presets and files apply."""
    group = parser.add_argument_group("run configuration")
    for name, info in RunConfig.model_fields.items():
        if name in skip:
            continue
        kind, choices = _flag_type(info.annotation)
        default = "DWDT_THREADS or 1" if info.default_factory is not None else info.default
        text = info.description or FLAG_SOURCES.get(name, name.replace("_", " "))
        flags = [f"--{name.replace('_', '-')}"] + FLAG_ALIASES.get(name, [])
        group.add_argument(*flags, dest=name, type=kind, choices=choices, default=None,
                           help=f"{text} (default: {default})")


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--threads", type=int, default=None, help="worker cap (default: DWDT_THREADS or 1)")
    parser.add_argument("--log-level", default=None, help="logging level (default: DWDT_LOG_LEVEL or INFO)")
    parser.add_argument("--config", default=None, help="key = value config file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dwdt", description="Differentiable weighted Delaunay triangulation.")
    sub = parser.add_subparsers(dest="command", required=True)

    tri = sub.add_parser("triangulate", help="soft triangulation and extraction of a point set")
    _common(tri)
    tri.add_argument("--input", required=True, help="point file (x y [w]) or OBJ patch (UVs, zero weights)")
    tri.add_argument("--alpha", type=float, default=None, help="sigmoid sharpness (default: 1000)")
    tri.add_argument("--k", type=int, default=None, help="candidate neighbours (default: 80)")
    tri.add_argument("--output-dir", default=None, help="output directory (default: out)")
    tri.add_argument("--compare-oracle", action="store_true", help="check the extraction against brute force")

    opt = sub.add_parser("optimize", help="optimize a triangulation for a task")
    opt.add_argument("--config", default=None, help="key = value config file")
    opt.add_argument("--log-level", default=None, help="logging level (default: DWDT_LOG_LEVEL or INFO)")
    add_config_flags(opt)

    orc = sub.add_parser("oracle", help="compare extraction with the brute-force triangulation")
    _common(orc)
    orc.add_argument("--input", default=None, help="point file; random instances when omitted")
    orc.add_argument("--n", type=int, default=20, help="points per random instance (default: 20)")
    orc.add_argument("--instances", type=int, default=1, help="random instances (default: 1)")
    orc.add_argument("--seed", type=int, default=0, help="seed of the first instance (default: 0)")
    orc.add_argument("--alpha", type=float, default=None, help="sigmoid sharpness (default: 1000)")
    orc.add_argument("--k", type=int, default=None, help="candidate neighbours (default: n - 1)")

    grad = sub.add_parser("gradcheck", help="finite-difference check of the loss gradients")
    _common(grad)
    grad.add_argument("--seed", type=int, default=0)
    grad.add_argument("--n", type=int, default=12, help="vertices per configuration (default: 12)")
    grad.add_argument("--configs", type=int, default=50, help="configurations per loss (default: 50)")
    grad.add_argument("--loss", action="append", choices=["size", "boundary", "angle", "curvature"],
                      help="restrict to these losses (repeatable)")
    grad.add_argument("--alpha", type=float, default=1000.0, help="sigmoid sharpness (default: 1000)")
    grad.add_argument("--surface", choices=sorted(SURFACES), default="plane")

    met = sub.add_parser("metrics", help="evaluation measures of a mesh")
    _common(met)
    met.add_argument("--mesh", required=True, help="3D OBJ mesh")
    met.add_argument("--fields", default=None, help="per-vertex field table")
    met.add_argument("--size-mode", choices=NORMALIZATION_MODES, default="auto")
    met.add_argument("--output", default=None, help="write a key = value report here")

    exp = sub.add_parser("export", help="convert a point file or patch to SVG/OBJ")
    _common(exp)
    exp.add_argument("--input", required=True)
    exp.add_argument("--svg", default=None)
    exp.add_argument("--obj", default=None)
    exp.add_argument("--alpha", type=float, default=None)
    exp.add_argument("--k", type=int, default=None)

    demo = sub.add_parser("demo", help="canned experiments")
    demo.add_argument("name", choices=sorted(DEMOS))
    demo.add_argument("--config", default=None, help="key = value config file")
    demo.add_argument("--log-level", default=None, help="logging level (default: DWDT_LOG_LEVEL or INFO)")
    add_config_flags(demo, skip=("task", "input", "fields", "surface", "field"))
    return parser


def config_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {name: getattr(args, name) for name in RunConfig.model_fields
            if getattr(args, name, None) is not None}


def _resolve(args: argparse.Namespace, task: Optional[str] = None, **extra) -> RunConfig:
    overrides = config_overrides(args)
    overrides.update({k: v for k, v in extra.items() if v is not None})
    return resolve_config(task, args.config, overrides)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def load_points(path: str) -> WeightedPointSet:
    """Point file rows, or an OBJ patch's UVs with zero weights."""
    if Path(path).suffix.lower() == ".obj":
        patch = read_obj_patch(path)
        return WeightedPointSet(patch.uv, np.zeros(len(patch.uv)))
    return read_point_set(path)


def oracle_agreement(ps: WeightedPointSet, alpha: float, k: int,
                     threads: Optional[int] = None) -> Tuple[bool, DiscreteMesh, DiscreteMesh]:
    """Whether the thresholded soft triangulation equals the brute-force one."""
    mesh = extract_discrete(inclusion_scores(ps, alpha, k, threads))
    oracle = brute_force_wdt(ps)
    return mesh.face_set() == oracle.face_set(), mesh, oracle


def random_instance(n: int, seed: int) -> WeightedPointSet:
    """Positions uniform in the unit square, squared weights uniform in [0, 0.09]."""
    rng = np.random.default_rng(seed)
    return WeightedPointSet(rng.uniform(0.0, 1.0, size=(n, 2)), np.sqrt(rng.uniform(0.0, 0.09, size=n)))


def cmd_triangulate(args: argparse.Namespace) -> int:
    config = _resolve(args, alpha=args.alpha, k=args.k, threads=args.threads, output_dir=args.output_dir)
    ps = load_points(args.input)
    soft = inclusion_scores(ps, config.alpha, config.k, config.threads)
    mesh = extract_discrete(soft, DEFAULT_THRESHOLD)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_svg(soft, out / "soft.svg")
    write_obj(mesh, out / "extraction.obj")
    report: Dict[str, Any] = {"alpha": config.alpha, "k": config.k, "threshold": DEFAULT_THRESHOLD,
                              "vertices": len(ps), "candidates": len(soft),
                              "dropped_degenerate": soft.candidates.dropped_degenerate,
                              "faces": len(mesh.faces), "redundant": int(np.count_nonzero(~mesh.used))}
    status = EXIT_OK
    if args.compare_oracle:
        match, _, oracle = oracle_agreement(ps, config.alpha, config.k, config.threads)
        report["oracle_faces"] = len(oracle.faces)
        report["oracle"] = "MATCH" if match else "MISMATCH"
        print("MATCH" if match else "MISMATCH")
        status = EXIT_OK if match else EXIT_MISMATCH
    write_report(out / "report.txt", report)
    print(format_table(report, "triangulate"))
    return status


def _optimize_directory(config: RunConfig) -> int:
    items = [(name, config, obj, fields) for name, obj, fields in patch_inputs(config.input)]
    results = optimize_patches(items, config.threads)
    for result in results:
        write_run_outputs(result, Path(config.output_dir) / result.setup.name)
        print(format_side_by_side({"initial": result.initial_metrics.as_dict(),
                                   result.setup.name: result.final_metrics.as_dict()}))
    return EXIT_OK


def cmd_optimize(args: argparse.Namespace) -> int:
    config = _resolve(args, task=args.task)
    if config.surface == "patch" and config.input and Path(config.input).is_dir():
        return _optimize_directory(config)
    setup = build_setup(config, name=config.task)
    try:
        result = optimize(setup)
    except NumericFailure as exc:
        if exc.snapshot is not None:
            out = Path(config.output_dir)
            out.mkdir(parents=True, exist_ok=True)
            write_point_set(out / "last_good_points.txt", exc.snapshot)
            logger.error("last finite point set written to %s", out / "last_good_points.txt")
        raise
    out = write_run_outputs(result, config.output_dir)
    columns = {"initial": result.initial_metrics.as_dict(), "adam": result.final_metrics.as_dict()}
    if config.baseline == "sa":
        final, log = anneal(setup)
        columns["sa"] = evaluate_mesh(setup, final).as_dict()
        write_obj(final.mesh3d, out / "sa_final.obj", only_used=True)
        write_report(out / "sa_metrics.txt", columns["sa"])
        logger.info("annealing accepted %d of %d proposals", log.metadata["accepted"], len(log))
    print(format_side_by_side(columns))
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    config = _resolve(args, alpha=args.alpha, threads=args.threads)
    if args.input:
        instances = [(args.input, load_points(args.input))]
    else:
        instances = [(f"seed {args.seed + i}", random_instance(args.n, args.seed + i))
                     for i in range(args.instances)]
    mismatches = skipped = 0
    for name, ps in instances:
        k = args.k if args.k is not None else len(ps) - 1
        try:
            match, mesh, oracle = oracle_agreement(ps, config.alpha, k, config.threads)
        except AmbiguousConfigurationError as exc:
            logger.warning("%s skipped: %s", name, exc)
            skipped += 1
            continue
        if not match:
            mismatches += 1
            logger.error("%s: %d faces only in the extraction, %d only in the oracle", name,
                         len(mesh.face_set() - oracle.face_set()), len(oracle.face_set() - mesh.face_set()))
    print("MATCH" if mismatches == 0 else "MISMATCH")
    print(f"{len(instances) - skipped - mismatches} matched, {mismatches} mismatched, {skipped} ambiguous")
    return EXIT_OK if mismatches == 0 else EXIT_MISMATCH


def cmd_gradcheck(args: argparse.Namespace) -> int:
    report = run_gradcheck(args.loss, args.n, args.configs, args.seed, args.alpha, SURFACES[args.surface]())
    for line in report.lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_MISMATCH


def cmd_metrics(args: argparse.Namespace) -> int:
    mesh = read_obj_mesh(args.mesh)
    table = read_fields(args.fields, len(mesh.vertices)) if args.fields else None
    values = compute_metrics(mesh, table.area if table else None, table.direction if table else None,
                             table.k1 if table else None, table.k2 if table else None, args.size_mode)
    report = MetricsReport.from_values(values)
    print(format_table(report.as_dict(), Path(args.mesh).name))
    if args.output:
        write_report(args.output, report.as_dict())
    return EXIT_OK


def cmd_export(args: argparse.Namespace) -> int:
    if not args.svg and not args.obj:
        raise ValueError("export needs --svg and/or --obj")
    if Path(args.input).suffix.lower() == ".obj":
        patch = read_obj_patch(args.input)
        uv_mesh = DiscreteMesh(patch.uv, patch.faces)
        if args.svg:
            write_svg(uv_mesh, args.svg)
        if args.obj:
            write_obj(DiscreteMesh(patch.vertices, patch.faces), args.obj, uv=patch.uv)
        return EXIT_OK
    config = _resolve(args, alpha=args.alpha, k=args.k, threads=args.threads)
    soft = inclusion_scores(read_point_set(args.input), config.alpha, config.k, config.threads)
    if args.svg:
        write_svg(soft, args.svg)
    if args.obj:
        write_obj(extract_discrete(soft), args.obj)
    return EXIT_OK


def cmd_demo(args: argparse.Namespace) -> int:
    overrides = config_overrides(args)
    result = run_demo(args.name, overrides, Path(overrides.get("output_dir", "out")))
    if result.columns:
        print(format_side_by_side(result.columns))
    for row in result.rows:
        print("  ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()))
    return EXIT_OK


COMMANDS = {
    "triangulate": cmd_triangulate,
    "optimize": cmd_optimize,
    "oracle": cmd_oracle,
    "gradcheck": cmd_gradcheck,
    "metrics": cmd_metrics,
    "export": cmd_export,
    "demo": cmd_demo,
}


def main(argv: Optional[List[str]] = None) -> int:
    load_environment()
    args = build_parser().parse_args(argv)
    level = (args.log_level or env_log_level()).upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except NumericFailure as exc:
        logger.error("numeric failure in %s: %s", exc.primitive, exc)
        return EXIT_NUMERIC
    except ValidationError as exc:
        logger.error("invalid configuration:\n%s", exc)
        return EXIT_VALIDATION
    except (DwdtError, ValueError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
