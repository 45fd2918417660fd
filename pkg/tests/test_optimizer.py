#!/usr/bin/env python3
"""
test_optimizer.py

Tests for run setup, the Adam loop and run outputs on small instances.
"""

import tempfile
import unittest
from pathlib import Path

import numpy as np

from helpers import grid_patch
from libs.errors import ConfigurationError
from libs.surface_map import Catenoid, PatchSurface, PlaneSurface
from pipelines.models import RunConfig, resolve_config
from pipelines.optimizer import (
    RunLog,
    build_fields,
    build_setup,
    expected_face_count,
    init_parameters,
    keep_inside,
    optimize,
    optimize_patches,
    patch_inputs,
    surface_area,
    write_run_outputs,
)
from tools.obj_io import write_patch_obj


def _small_config(**overrides):
    values = {"n_vertices": 12, "k": 11, "iterations": 3, "seed": 4, "threads": 1}
    values.update(overrides)
    return resolve_config("size", overrides=values)


class TestInitialization(unittest.TestCase):
    def test_random_init_is_seeded_and_inside(self):
        a = init_parameters(PlaneSurface(), "random", 50, seed=3)
        b = init_parameters(PlaneSurface(), "random", 50, seed=3)
        np.testing.assert_array_equal(a.positions, b.positions)
        np.testing.assert_array_equal(a.weights, b.weights)
        self.assertTrue(np.all((a.positions >= 0.0) & (a.positions <= 1.0)))
        self.assertTrue(np.all((a.weights >= 0.0) & (a.weights <= 0.05 * np.sqrt(2.0))))

    def test_uniform_surface_init_on_the_catenoid(self):
        cat = Catenoid()
        ps = init_parameters(cat, "uniform-surface", 40, seed=1)
        self.assertEqual(len(ps), 40)
        self.assertTrue(np.all(cat.contains(ps.positions)))

    def test_uv_init(self):
        surface = PatchSurface(grid_patch(3))
        ps = init_parameters(surface, "uv", seed=0)
        np.testing.assert_array_equal(ps.positions, surface.mesh.uv)
        with self.assertRaises(ConfigurationError):
            init_parameters(PlaneSurface(), "uv")
        with self.assertRaises(ValueError):
            init_parameters(PlaneSurface(), "grid")


class TestGeometry(unittest.TestCase):
    def test_expected_face_count(self):
        points = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]], dtype=float)
        self.assertEqual(expected_face_count(points), 4)

    def test_surface_areas(self):
        self.assertAlmostEqual(surface_area(PlaneSurface()), 1.0)
        self.assertAlmostEqual(surface_area(Catenoid()), 2.0 * np.pi * (1.0 + np.sinh(2.0) / 2.0))
        self.assertAlmostEqual(surface_area(PatchSurface(grid_patch(2))), 1.0)

    def test_keep_inside(self):
        positions = np.array([[1.2, 0.5], [0.3, 0.3], [-0.1, -0.2]])
        np.testing.assert_allclose(keep_inside(PlaneSurface(), positions), [[1.0, 0.5], [0.3, 0.3], [0.0, 0.0]])

    def test_catenoid_fields_need_the_catenoid(self):
        config = RunConfig(surface="catenoid", field="catenoid-meridian")
        with self.assertRaises(ConfigurationError):
            build_fields(config, PlaneSurface(), 0.1, 10)


class TestRunLog(unittest.TestCase):
    def test_iterations_must_increase(self):
        log = RunLog()
        log.append({"iteration": 0, "total": 1.0})
        log.append({"iteration": 1, "total": 0.5})
        with self.assertRaises(ValueError):
            log.append({"iteration": 1, "total": 0.4})
        np.testing.assert_array_equal(log.totals(), [1.0, 0.5])
        self.assertTrue(np.isnan(log.column("size")).all())


class TestOptimize(unittest.TestCase):
    def test_setup(self):
        setup = build_setup(_small_config())
        self.assertEqual(len(setup.initial), 12)
        self.assertAlmostEqual(setup.target_area, 1.0 / setup.metadata["expected_faces"])
        self.assertEqual(setup.problem.active_terms(), ["size", "boundary", "angle"])

    def test_zero_iterations(self):
        result = optimize(build_setup(_small_config()), iterations=0)
        self.assertEqual(len(result.log), 0)
        self.assertEqual(result.initial.mesh2d.face_set(), result.final.mesh2d.face_set())
        self.assertEqual(result.initial_metrics, result.final_metrics)

    def test_a_few_iterations(self):
        result = optimize(build_setup(_small_config(snapshot_every=2)))
        self.assertEqual(len(result.log), 3)
        self.assertTrue(np.all(np.isfinite(result.log.totals())))
        self.assertEqual([s.iteration for s in result.log.snapshots], [0, 2])
        self.assertEqual(result.log.rows[0]["branch_switches"], 0)
        self.assertTrue(result.final.manifold.is_manifold)
        self.assertEqual(result.mesh3d.dimension, 3)
        d, _ = PlaneSurface().boundary.signed_distance(result.points.positions)
        self.assertTrue(np.all(d >= -1e-12))

    def test_outputs(self):
        result = optimize(build_setup(_small_config(iterations=1, snapshot_every=1)))
        with tempfile.TemporaryDirectory() as tmp:
            out = write_run_outputs(result, Path(tmp) / "run")
            names = {p.name for p in out.iterdir()}
            self.assertTrue({"initial.obj", "final.obj", "final_2d.obj", "final_soft.svg", "loss.csv",
                             "metrics.txt", "run.txt", "snapshots"} <= names)
            report = (out / "metrics.txt").read_text()
            self.assertIn("final_faces = ", report)
            self.assertIn("manifold = ", report)


class TestPatches(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self._tmp.name)
        write_patch_obj(grid_patch(3), self.dir / "flat.obj")
        write_patch_obj(grid_patch(3, height=lambda u, v: 0.2 * u * v), self.dir / "bent.obj")

    def tearDown(self):
        self._tmp.cleanup()

    def test_patch_inputs(self):
        items = patch_inputs(self.dir)
        self.assertEqual([name for name, _, _ in items], ["bent", "flat"])
        self.assertTrue(all(fields is None for _, _, fields in items))
        with tempfile.TemporaryDirectory() as empty:
            with self.assertRaises(ConfigurationError):
                patch_inputs(empty)

    def test_patches_run_concurrently(self):
        items = []
        for name, obj, fields in patch_inputs(self.dir):
            config = resolve_config("size", overrides={"surface": "patch", "input": str(obj), "init": "uv",
                                                       "iterations": 1, "seed": 2})
            items.append((name, config, obj, fields))
        results = optimize_patches(items, workers=2)
        self.assertEqual([r.setup.name for r in results], ["bent", "flat"])
        for result in results:
            self.assertGreater(len(result.final.mesh2d.faces), 0)
            self.assertIn("uv_scale", result.setup.metadata)


if __name__ == "__main__":
    unittest.main()
