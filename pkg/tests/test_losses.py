#!/usr/bin/env python3
"""
test_losses.py

Loss values checked against plain re-implementations of their formulas,
and the gradient check over seeded configurations.
"""

import unittest

import numpy as np
from scipy.special import logsumexp

from helpers import random_points
from libs.errors import ConfigurationError, EmptyTriangulationError
from libs.gradient_engine import Tape
from libs.losses import (
    ALIGN_TASK_WEIGHTS,
    SIZE_TASK_WEIGHTS,
    LossProblem,
    alignment_edges,
    boundary_repulsion_op,
    discrete_terms,
    evaluate_terms,
)
from libs.soft_dwdt import inclusion_scores
from libs.surface_map import BoundaryPolygon, ConstantArea, ConstantDirection, FieldSet, PlaneSurface, RotatingField
from pipelines.gradcheck import run_gradcheck

SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
SQUARE_FACES = np.array([[0, 1, 2], [0, 2, 3]])


def _problem(weights, area=0.3, direction=None):
    fields = FieldSet(ConstantArea(area), direction or ConstantDirection((1.0, 0.0, 0.0)))
    return LossProblem(PlaneSurface(), fields, weights)


def _reference_curvature(points, faces, directions):
    """-(1/sum s) sum_j [LSE(C.h) + LSE(-C.h)] with unit scores."""
    per_vertex = {}
    for f in faces:
        for slot in range(3):
            j = f[slot]
            for step in (1, 2):
                h = points[j] - points[f[(slot + step) % 3]]
                per_vertex.setdefault(j, []).append(float(directions[j] @ (h / np.linalg.norm(h))))
    total = sum(logsumexp(a) + logsumexp(-np.array(a)) for a in per_vertex.values())
    return -total / (3.0 * len(faces))


class TestDiscreteLosses(unittest.TestCase):
    def test_size_loss(self):
        values = discrete_terms(SQUARE, SQUARE_FACES, _problem({"size": 1.0}))
        # both triangles have area 0.5 against a target of 0.3
        self.assertAlmostEqual(values["size"], 0.04)
        self.assertAlmostEqual(values["total"], 0.04)

    def test_angle_loss(self):
        values = discrete_terms(SQUARE, SQUARE_FACES, _problem({"angle": 1.0}))
        cosines = np.array([0.0, np.sqrt(0.5), np.sqrt(0.5)])
        expected = 2.0 * np.sum(np.abs(cosines - 0.5)) / 6.0
        self.assertAlmostEqual(values["angle"], expected)

    def test_equilateral_angle_loss_vanishes(self):
        points = np.array([[0.2, 0.2], [0.8, 0.2], [0.5, 0.2 + 0.3 * np.sqrt(3.0)]])
        values = discrete_terms(points, [[0, 1, 2]], _problem({"angle": 1.0}))
        self.assertAlmostEqual(values["angle"], 0.0, places=12)

    def test_curvature_loss(self):
        points = np.array([[0.1, 0.1], [0.9, 0.2], [0.5, 0.9], [0.2, 0.6]])
        faces = np.array([[0, 1, 2], [0, 2, 3]])
        values = discrete_terms(points, faces, _problem({"curvature": 1.0}, direction=RotatingField()))
        c = RotatingField().value(points)
        lifted = np.column_stack([points, np.zeros(4)])
        self.assertAlmostEqual(values["curvature"], _reference_curvature(lifted, faces, c), places=10)

    def test_weighted_total(self):
        weights = {"size": 2.0, "angle": 3.0}
        values = discrete_terms(SQUARE, SQUARE_FACES, _problem(weights))
        self.assertAlmostEqual(values["total"], 2.0 * values["size"] + 3.0 * values["angle"])
        self.assertNotIn("boundary", values)

    def test_empty_mesh_raises(self):
        with self.assertRaises(EmptyTriangulationError):
            discrete_terms(SQUARE, np.zeros((0, 3)), _problem({"size": 1.0}))


class TestBoundaryRepulsion(unittest.TestCase):
    def test_values(self):
        tape = Tape()
        positions = tape.leaf(np.array([[0.5, 0.5], [0.005, 0.5], [0.5, 0.998]]))
        node = boundary_repulsion_op(tape, positions, BoundaryPolygon.rectangle(0, 0, 1, 1), 0.01)
        expected = np.mean(np.exp([0.0, 0.005, 0.008]))
        self.assertAlmostEqual(float(node.value), expected)
        tape.backward(node)
        # only vertices inside the margin are pushed, along the inward normal
        np.testing.assert_allclose(positions.grad[0], [0.0, 0.0])
        self.assertLess(positions.grad[1, 0], 0.0)
        self.assertGreater(positions.grad[2, 1], 0.0)

    def test_epsilon_must_be_positive(self):
        tape = Tape()
        with self.assertRaises(ValueError):
            boundary_repulsion_op(tape, tape.leaf(np.zeros((1, 2))), BoundaryPolygon.rectangle(0, 0, 1, 1), 0.0)


class TestLossProblem(unittest.TestCase):
    def test_task_weights(self):
        self.assertEqual(SIZE_TASK_WEIGHTS["angle"], 1e7)
        self.assertEqual(ALIGN_TASK_WEIGHTS["curvature"], 1.0)
        self.assertEqual(_problem(SIZE_TASK_WEIGHTS).active_terms(), ["size", "boundary", "angle"])

    def test_rejects_bad_weights(self):
        with self.assertRaises(ValueError):
            _problem({"size": 0.0})
        with self.assertRaises(ValueError):
            _problem({"size": 1.0, "angle": -1.0})
        with self.assertRaises(ValueError):
            _problem({"smoothness": 1.0})

    def test_missing_field(self):
        problem = LossProblem(PlaneSurface(), FieldSet(None, None), {"size": 1.0})
        with self.assertRaises(ConfigurationError):
            discrete_terms(SQUARE, SQUARE_FACES, problem)

    def test_soft_terms_approach_discrete_terms(self):
        ps = random_points(12, seed=40, max_weight_sq=0.0)
        soft = inclusion_scores(ps, alpha=1e6, k=11)
        keep = soft.scores > 0.5
        problem = _problem({"size": 1.0, "angle": 1.0})
        soft_values = evaluate_terms(soft, problem)
        hard_values = discrete_terms(ps.positions, soft.triples[keep], problem)
        self.assertAlmostEqual(soft_values["size"], hard_values["size"], places=4)
        self.assertAlmostEqual(soft_values["angle"], hard_values["angle"], places=4)


class TestAlignmentEdges(unittest.TestCase):
    def test_cutoff_and_isolated_vertices(self):
        triples = np.array([[0, 1, 2], [1, 2, 3]])
        edges = alignment_edges(triples, np.array([0.9, 1e-4]), n=5)
        self.assertEqual(len(edges.vertex), 6)
        self.assertEqual(edges.isolated, [3, 4])
        self.assertTrue(np.all(np.diff(edges.vertex) >= 0))


class TestGradients(unittest.TestCase):
    def test_every_term_matches_finite_differences(self):
        report = run_gradcheck(n=8, configs=2, seed=3)
        for term, check in report.checks.items():
            self.assertTrue(check.passed, f"{term}: worst relative error {check.worst:.3e}")
        self.assertTrue(report.passed)

    def test_unknown_term(self):
        with self.assertRaises(ValueError):
            run_gradcheck(terms=["smoothness"], n=5, configs=1)


if __name__ == "__main__":
    unittest.main()
