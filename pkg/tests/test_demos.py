#!/usr/bin/env python3
"""
test_demos.py

Tests for the canned experiments. The optimization demos run only with
DWDT_RUN_SLOW=1.
"""

import tempfile
import unittest
from pathlib import Path

import numpy as np

from helpers import SLOW
from libs.geom_core import weighted_circumcenter
from libs.wdt_oracle import brute_force_wdt
from pipelines.demos import (
    bisect,
    center_redundant,
    center_score,
    exclusion_crossings,
    exclusion_points,
    run_demo,
)


def _analytic_crossing() -> float:
    """Centre weight at which the centre enters the power circle of its enclosing corner triangle."""
    ps = exclusion_points(0.0)
    v, w = ps.positions, ps.weights
    center = v[4]
    for face in brute_force_wdt(ps).faces:
        a, b, c = v[face]
        signs = [(q - p)[0] * (center - p)[1] - (q - p)[1] * (center - p)[0] for p, q in ((a, b), (b, c), (c, a))]
        if all(s > 0 for s in signs):
            o = weighted_circumcenter(a, w[face[0]], b, w[face[1]], c, w[face[2]])
            power = np.sum((a - o) ** 2) - w[face[0]] ** 2
            return float(np.sqrt(np.sum((center - o) ** 2) - power))
    raise AssertionError("centre is not enclosed by a corner triangle")


class TestBisect(unittest.TestCase):
    def test_crossing(self):
        self.assertAlmostEqual(bisect(lambda x: x > 0.3, 0.0, 1.0), 0.3, places=5)

    def test_bracket_is_checked(self):
        with self.assertRaises(ValueError):
            bisect(lambda x: True, 0.0, 1.0)


class TestVertexExclusion(unittest.TestCase):
    def test_points(self):
        ps = exclusion_points(0.2)
        self.assertEqual(len(ps), 5)
        self.assertEqual(float(ps.weights[4]), 0.2)
        np.testing.assert_allclose(ps.weights[:4] ** 2, [0.75, 0.76, 0.77, 0.78])

    def test_light_center_is_excluded(self):
        self.assertTrue(center_redundant(0.0))
        self.assertLess(center_score(0.0), 0.5)
        self.assertFalse(center_redundant(1.0))
        self.assertGreater(center_score(1.0), 0.5)

    def test_soft_and_oracle_crossings_agree(self):
        oracle, soft = exclusion_crossings()
        self.assertAlmostEqual(oracle, _analytic_crossing(), places=4)
        self.assertLess(abs(oracle - soft), 1e-3)

    def test_demo_rows(self):
        result = run_demo("vertex-exclusion")
        self.assertEqual(len(result.rows), 21)
        self.assertTrue(result.rows[0]["redundant"])
        self.assertLess(result.columns["crossing"]["difference"], 1e-3)

    def test_unknown_demo(self):
        with self.assertRaises(ValueError):
            run_demo("teapot")


@unittest.skipUnless(SLOW, "set DWDT_RUN_SLOW=1 to run the optimization demos")
class TestOptimizationDemos(unittest.TestCase):
    def test_square_size_reduces_the_size_error(self):
        with tempfile.TemporaryDirectory() as tmp:
            result = run_demo("square-size", {"n_vertices": 60, "iterations": 300}, Path(tmp))
            self.assertTrue((Path(tmp) / "square-size" / "final.obj").exists())
        self.assertLess(result.columns["final"]["area_cv"], result.columns["initial"]["area_cv"])

    def test_catenoid_equal_evens_out_areas(self):
        with tempfile.TemporaryDirectory() as tmp:
            result = run_demo("catenoid-equal", {"n_vertices": 60, "iterations": 300}, Path(tmp))
            self.assertTrue((Path(tmp) / "catenoid-equal" / "final.obj").exists())
        self.assertLess(result.columns["final"]["area_cv"], result.columns["initial"]["area_cv"])

    def test_catenoid_curvature_areas_follow_curvature(self):
        result = run_demo("catenoid-curvature", {"n_vertices": 60, "iterations": 300})
        self.assertIn("size_rmse", result.columns["final"])
        self.assertLess(result.columns["final"]["size_rmse"], result.columns["initial"]["size_rmse"])

    def test_square_align_with_baseline(self):
        result = run_demo("square-align", {"n_vertices": 40, "iterations": 100, "baseline": "sa"})
        self.assertEqual(set(result.columns), {"initial", "adam", "sa"})

    def test_blend_sweep(self):
        result = run_demo("blend-sweep", {"n_vertices": 40, "iterations": 100})
        self.assertEqual([row["t"] for row in result.rows], [0.0, 0.25, 0.5, 0.75, 1.0])


if __name__ == "__main__":
    unittest.main()
