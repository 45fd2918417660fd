#!/usr/bin/env python3
"""
test_surface_map.py

Tests for boundary polygons, parameterizations and fields.
"""

import unittest

import numpy as np

from helpers import grid_patch
from libs.errors import ConfigurationError, InvalidPatchError, OutsideDomainError
from libs.gradient_engine import evaluate_with_gradient, finite_difference_check, total
from libs.geom_core import WeightedPointSet
from libs.surface_map import (
    BoundaryPolygon,
    Catenoid,
    CatenoidCurvatureArea,
    CatenoidMeridianField,
    ConstantArea,
    FieldSet,
    PatchSurface,
    PlaneSurface,
    RotatingField,
    UvPatchMesh,
    boundary_polygon,
    lift,
    lift_op,
    normalize_uv,
    sample_field,
)


def _numeric_jacobian(par, uv, h=1e-6):
    jac = np.zeros((3, 2))
    for axis in range(2):
        step = np.zeros(2)
        step[axis] = h
        jac[:, axis] = (par.lift(uv + step)[0] - par.lift(uv - step)[0]) / (2 * h)
    return jac


class TestBoundaryPolygon(unittest.TestCase):
    def setUp(self):
        self.square = BoundaryPolygon.rectangle(0, 0, 1, 1)

    def test_signed_distance_inside_and_outside(self):
        d, grad = self.square.signed_distance(np.array([[0.5, 0.2], [1.5, 0.5], [1.3, 1.4]]))
        np.testing.assert_allclose(d, [0.2, -0.5, -0.5])
        np.testing.assert_allclose(grad[0], [0.0, 1.0])
        np.testing.assert_allclose(grad[2], [-0.6, -0.8])

    def test_clockwise_input_is_reoriented(self):
        cw = BoundaryPolygon.from_coords([[0, 0], [0, 1], [1, 1], [1, 0]])
        d, _ = cw.signed_distance(np.array([[0.5, 0.25]]))
        self.assertAlmostEqual(float(d[0]), 0.25)
        self.assertAlmostEqual(cw.area, 1.0)

    def test_contains_and_closest_points(self):
        np.testing.assert_array_equal(self.square.contains(np.array([[0.5, 0.5], [2.0, 0.5]])), [True, False])
        np.testing.assert_allclose(self.square.closest_points([[1.2, 0.5]]), [[1.0, 0.5]])
        self.assertAlmostEqual(self.square.diagonal, np.sqrt(2.0))

    def test_self_intersecting_polygon_is_rejected(self):
        with self.assertRaises(InvalidPatchError):
            BoundaryPolygon.from_coords([[0, 0], [1, 1], [1, 0], [0, 1]])


class TestParameterizations(unittest.TestCase):
    def test_plane_lift(self):
        plane = PlaneSurface()
        np.testing.assert_allclose(plane.lift([[0.2, 0.3]]), [[0.2, 0.3, 0.0]])
        np.testing.assert_allclose(plane.forward([[0.2, 0.3, 0.0]]), [[0.2, 0.3]])
        with self.assertRaises(ValueError):
            PlaneSurface(1.0, 0.0, 0.0, 1.0)

    def test_catenoid_round_trip_and_jacobian(self):
        cat = Catenoid()
        uv = np.array([[0.3, -0.4], [2.0, 0.7], [5.5, 0.1]])
        np.testing.assert_allclose(cat.forward(cat.lift(uv)), uv, atol=1e-12)
        jac = cat.jacobian(uv)
        for i in range(len(uv)):
            np.testing.assert_allclose(jac[i], _numeric_jacobian(cat, uv[i]), atol=1e-7)
        np.testing.assert_allclose(cat.area_element(uv), np.cosh(uv[:, 1]) ** 2)

    def test_catenoid_curvatures(self):
        k1, k2 = Catenoid.curvatures(np.array([[0.0, 0.0], [1.0, 1.0]]))
        np.testing.assert_allclose(k1, [1.0, 1.0 / np.cosh(1.0) ** 2])
        np.testing.assert_allclose(k2, -k1)

    def test_uniform_surface_sampling_favours_large_area_elements(self):
        cat = Catenoid()
        uv = cat.sample_uniform(4000, np.random.default_rng(0))
        self.assertEqual(uv.shape, (4000, 2))
        self.assertTrue(np.all(cat.contains(uv)))
        outer = np.mean(np.abs(uv[:, 1]) > 0.5)
        # cosh^2 weighting puts more than half of the area at |v| > 0.5
        self.assertGreater(outer, 0.5)

    def test_strict_lift_rejects_outside_points(self):
        with self.assertRaises(OutsideDomainError) as ctx:
            lift(PlaneSurface(), [[1.5, 0.5]])
        np.testing.assert_allclose(ctx.exception.nearest, [1.0, 0.5])
        np.testing.assert_allclose(lift(PlaneSurface(), [[1.5, 0.5]], strict=False), [[1.5, 0.5, 0.0]])


class TestPatchSurface(unittest.TestCase):
    def setUp(self):
        self.mesh = grid_patch(3, height=lambda u, v: 2.0 * u + v)
        self.surface = PatchSurface(self.mesh)

    def test_boundary_is_the_unit_square(self):
        self.assertAlmostEqual(self.surface.boundary.area, 1.0)
        self.assertEqual(len(boundary_polygon(self.mesh).vertices), 12)

    def test_lift_is_piecewise_linear(self):
        uv = np.array([[0.1, 0.2], [0.5, 0.5], [0.95, 0.05], [1.0, 1.0]])
        np.testing.assert_allclose(self.surface.lift(uv)[:, 2], 2.0 * uv[:, 0] + uv[:, 1])
        jac = self.surface.jacobian(uv)
        np.testing.assert_allclose(jac[:, 2, :], np.tile([2.0, 1.0], (4, 1)))

    def test_outside_point_raises(self):
        with self.assertRaises(OutsideDomainError):
            self.surface.lift([[1.5, 0.5]])

    def test_forward_inverts_lift(self):
        uv = np.array([[0.3, 0.6], [0.8, 0.1]])
        np.testing.assert_allclose(self.surface.forward(self.surface.lift(uv)), uv, atol=1e-10)

    def test_inverted_face_is_rejected(self):
        faces = self.mesh.faces.copy()
        faces[0] = faces[0][[0, 2, 1]]
        with self.assertRaises(InvalidPatchError):
            UvPatchMesh(self.mesh.vertices, self.mesh.uv, faces)

    def test_clockwise_patch_is_flipped(self):
        flipped = UvPatchMesh(self.mesh.vertices, self.mesh.uv, self.mesh.faces[:, [0, 2, 1]])
        self.assertTrue(np.all(flipped.uv_signed_areas() > 0))

    def test_normalize_uv(self):
        scaled, factor = normalize_uv(self.mesh, 0.05)
        self.assertAlmostEqual(scaled.average_uv_edge_length(), 0.05)
        self.assertAlmostEqual(scaled.metadata["uv_scale"], factor)
        np.testing.assert_allclose(scaled.vertices, self.mesh.vertices)

    def test_sample_field(self):
        mesh = UvPatchMesh(self.mesh.vertices, self.mesh.uv, self.mesh.faces, area=self.mesh.uv[:, 0] + 1.0)
        surface = PatchSurface(mesh)
        np.testing.assert_allclose(sample_field(surface, "A", [[0.25, 0.5]]), [1.25])
        with self.assertRaises(ConfigurationError):
            sample_field(surface, "C", [[0.25, 0.5]])
        with self.assertRaises(ValueError):
            sample_field(surface, "B", [[0.25, 0.5]])


class TestFields(unittest.TestCase):
    def test_rotating_field_is_unit(self):
        c = RotatingField().value(np.array([[0.0, 0.3], [0.5, 0.1], [0.25, 0.9]]))
        np.testing.assert_allclose(np.linalg.norm(c, axis=1), 1.0)
        np.testing.assert_allclose(c[1], [0.0, 1.0, 0.0], atol=1e-12)

    def test_meridian_field_is_tangent(self):
        uv = np.array([[0.4, -0.6], [3.0, 0.8]])
        c = CatenoidMeridianField().value(uv)
        jac = Catenoid().jacobian(uv)
        normals = np.cross(jac[:, :, 0], jac[:, :, 1])
        np.testing.assert_allclose(np.sum(c * normals, axis=1), 0.0, atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(c, axis=1), 1.0)

    def test_curvature_area_gradient(self):
        field = CatenoidCurvatureArea(0.1)
        uv = np.array([[1.0, 0.4]])
        h = 1e-6
        numeric = (field.value(uv + [0, h]) - field.value(uv - [0, h])) / (2 * h)
        self.assertAlmostEqual(float(field.gradient(uv)[0, 1]), float(numeric[0]), places=6)

    def test_field_set_requirements(self):
        fields = FieldSet(ConstantArea(1.0), None)
        self.assertEqual(fields.require_area().area, 1.0)
        with self.assertRaises(ConfigurationError):
            fields.require_direction()
        with self.assertRaises(ValueError):
            ConstantArea(0.0)

    def test_lift_op_gradient(self):
        cat = Catenoid()

        def expr(tape, positions, weights):
            return total(tape, lift_op(tape, cat, positions))

        ps = WeightedPointSet(np.array([[0.5, 0.2], [2.5, -0.3]]), np.zeros(2))
        self.assertLess(finite_difference_check(expr, ps), 1e-4)
        self.assertTrue(evaluate_with_gradient(expr, ps).is_finite())


if __name__ == "__main__":
    unittest.main()
