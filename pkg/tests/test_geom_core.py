#!/usr/bin/env python3
"""
test_geom_core.py

Tests for the power-geometry primitives in libs/geom_core.py.
"""

import unittest

import numpy as np

from libs.errors import DegeneratePairError, DegenerateTriangleError
from libs.geom_core import (
    WeightedPointSet,
    bisector_distances,
    knn,
    orient2d,
    power_bisector,
    power_distance,
    signed_bisector_distance,
    weighted_circumcenter,
    weighted_circumcenters,
)


class TestWeightedPointSet(unittest.TestCase):
    def test_lengths_must_match(self):
        with self.assertRaises(ValueError):
            WeightedPointSet(np.zeros((3, 2)), np.zeros(2))

    def test_rejects_non_finite(self):
        with self.assertRaises(ValueError):
            WeightedPointSet(np.array([[0.0, np.nan]]), np.zeros(1))

    def test_from_points_defaults_to_zero_weights(self):
        ps = WeightedPointSet.from_points([[0, 0], [1, 0], [0, 1]])
        np.testing.assert_array_equal(ps.weights, np.zeros(3))
        self.assertEqual(len(ps), 3)

    def test_check_distinct(self):
        ps = WeightedPointSet.from_points([[0, 0], [1, 0], [0, 0]])
        with self.assertRaises(DegeneratePairError):
            ps.check_distinct()

    def test_weight_shift_changes_squared_weights(self):
        ps = WeightedPointSet.from_points([[0, 0], [1, 0]], [0.5, 1.0])
        shifted = ps.with_weights_shifted(0.75)
        np.testing.assert_allclose(shifted.weights ** 2, [1.0, 1.75])


class TestPowerBisector(unittest.TestCase):
    def test_power_distance(self):
        self.assertAlmostEqual(float(power_distance([0.0, 0.0], [3.0, 4.0], 2.0)), 21.0)

    def test_unweighted_bisector_is_the_midline(self):
        b = power_bisector([0.0, 0.0], 0.0, [2.0, 0.0], 0.0)
        self.assertAlmostEqual(signed_bisector_distance([1.0, 5.0], b), 0.0)
        self.assertAlmostEqual(signed_bisector_distance([0.0, 0.0], b), 1.0)
        self.assertAlmostEqual(signed_bisector_distance([3.0, 0.0], b), -2.0)

    def test_weight_moves_the_bisector_away(self):
        # w_j^2 = 1 shifts the line by w^2 / (2L) = 0.25 toward v_k
        b = power_bisector([0.0, 0.0], 1.0, [2.0, 0.0], 0.0)
        self.assertAlmostEqual(signed_bisector_distance([1.25, 0.0], b), 0.0)

    def test_coincident_points_raise(self):
        with self.assertRaises(DegeneratePairError):
            power_bisector([1.0, 1.0], 0.0, [1.0, 1.0], 0.5)

    def test_vectorized_distances_match_the_scalar_form(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            x, vj, vm = rng.uniform(-1, 1, size=(3, 2))
            wj, wm = rng.uniform(0, 0.5, size=2)
            b = power_bisector(vj, wj, vm, wm)
            expected = signed_bisector_distance(x, b)
            got = bisector_distances(x, vj, wj, vm, wm)
            self.assertAlmostEqual(float(got), expected, places=12)
            # the sign follows the power difference
            diff = power_distance(x, vm, wm) - power_distance(x, vj, wj)
            self.assertEqual(np.sign(diff), np.sign(expected))


class TestWeightedCircumcenter(unittest.TestCase):
    def test_unweighted_right_triangle(self):
        c = weighted_circumcenter([0, 0], 0.0, [2, 0], 0.0, [0, 2], 0.0)
        np.testing.assert_allclose(c, [1.0, 1.0])

    def test_equal_power_to_all_three(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            v = rng.uniform(0, 1, size=(3, 2))
            w = rng.uniform(0, 0.3, size=3)
            c = weighted_circumcenter(v[0], w[0], v[1], w[1], v[2], w[2])
            powers = [float(power_distance(c, v[i], w[i])) for i in range(3)]
            self.assertAlmostEqual(powers[0], powers[1], places=9)
            self.assertAlmostEqual(powers[0], powers[2], places=9)

    def test_collinear_raises(self):
        with self.assertRaises(DegenerateTriangleError) as ctx:
            weighted_circumcenter([0, 0], 0.0, [1, 1], 0.0, [2, 2], 0.0)
        self.assertEqual(ctx.exception.determinant, 0.0)

    def test_stacked_form(self):
        v = np.array([[[0, 0], [2, 0], [0, 2]], [[0, 0], [4, 0], [0, 4]]], dtype=float)
        w = np.zeros((2, 3))
        centers, det = weighted_circumcenters(v[:, 0], w[:, 0], v[:, 1], w[:, 1], v[:, 2], w[:, 2])
        np.testing.assert_allclose(centers, [[1, 1], [2, 2]])
        # det of the 2x2 system is 4x the orientation determinant
        self.assertAlmostEqual(float(det[0]), 4.0 * orient2d(v[0, 0], v[0, 1], v[0, 2]))


class TestKnn(unittest.TestCase):
    def test_ties_break_by_lower_index(self):
        points = np.array([[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1]], dtype=float)
        table = knn(points, 2)
        self.assertEqual(table.neighbors(0), [1, 2])

    def test_rows_exclude_self_and_are_sorted(self):
        rng = np.random.default_rng(5)
        points = rng.uniform(0, 1, size=(30, 2))
        table = knn(points, 6)
        for i in range(len(points)):
            row = table.neighbors(i)
            self.assertNotIn(i, row)
            d = np.linalg.norm(points[row] - points[i], axis=1)
            self.assertTrue(np.all(np.diff(d) >= 0))
            brute = np.argsort(np.linalg.norm(points - points[i], axis=1), kind="stable")[1:7]
            self.assertEqual(sorted(row), sorted(int(j) for j in brute))

    def test_k_is_clamped(self):
        points = np.array([[0, 0], [1, 0], [0, 1]], dtype=float)
        table = knn(points, 80)
        self.assertEqual(table.k, 2)
        self.assertEqual(len(table.lists()), 3)

    def test_bad_arguments(self):
        with self.assertRaises(ValueError):
            knn(np.zeros((3, 2)), 0)
        with self.assertRaises(ValueError):
            knn(np.zeros((1, 2)), 1)


if __name__ == "__main__":
    unittest.main()
