#!/usr/bin/env python3
"""
test_models.py

Tests for the configuration models and their layering.
"""

import tempfile
import unittest

from pydantic import ValidationError

from helpers import write_text
from libs.errors import ConfigurationError
from pipelines.models import LossConfig, MetricsReport, RunConfig, resolve_config


class TestLossConfig(unittest.TestCase):
    def test_needs_a_positive_weight(self):
        with self.assertRaises(ValidationError):
            LossConfig()
        with self.assertRaises(ValidationError):
            LossConfig(weight_size=-1.0, weight_angle=1.0)

    def test_blend(self):
        weights = LossConfig(weight_size=0.5, weight_angle=1e7, blend_t=0.25).term_weights()
        self.assertAlmostEqual(weights["size"], 0.375)
        self.assertAlmostEqual(weights["angle"], 2.5e6)

    def test_blend_endpoint_can_leave_no_term(self):
        with self.assertRaises(ValidationError):
            LossConfig(weight_size=0.5, blend_t=1.0)


class TestRunConfig(unittest.TestCase):
    def test_defaults(self):
        config = RunConfig()
        self.assertEqual(config.alpha, 1000.0)
        self.assertEqual(config.k, 80)
        self.assertEqual(config.lr, 1e-4)
        self.assertGreaterEqual(config.threads, 1)

    def test_rejects_inconsistent_settings(self):
        for bad in ({"bogus": 1}, {"surface": "patch"}, {"init": "uv"}, {"field": "catenoid-meridian"},
                    {"task": "blend"}, {"field": "file"}, {"alpha": 0.0}, {"k": 2}):
            with self.assertRaises(ValidationError, msg=str(bad)):
                RunConfig(**bad)

    def test_empty_path_is_none(self):
        self.assertIsNone(RunConfig(input=" ").input)

    def test_loss_config_ignores_blend_outside_blend_task(self):
        config = RunConfig(task="size", weight_size=0.5, weight_angle=1e7, blend_t=0.3)
        self.assertEqual(config.loss_config().term_weights()["size"], 0.5)
        blended = RunConfig(task="blend", weight_size=0.5, weight_angle=1e7, blend_t=0.3)
        self.assertAlmostEqual(blended.loss_config().term_weights()["size"], 0.35)


class TestResolveConfig(unittest.TestCase):
    def test_presets(self):
        size = resolve_config("size")
        self.assertEqual(size.task, "size")
        self.assertEqual(size.iterations, 1500)
        self.assertEqual(size.weight_angle, 1e7)
        align = resolve_config("align")
        self.assertEqual(align.weight_curvature, 1.0)
        self.assertEqual(resolve_config("blend").blend_t, 0.5)

    def test_layering(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_text(tmp, "run.cfg", "iterations = 7\nseed = 3\n")
            config = resolve_config("size", path, {"seed": 9, "lr": None})
        self.assertEqual(config.iterations, 7)
        self.assertEqual(config.seed, 9)
        self.assertEqual(config.lr, 1e-4)
        self.assertEqual(config.weight_boundary, 500.0)

    def test_unknown_key_in_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_text(tmp, "run.cfg", "weight_smoothness = 1\n")
            with self.assertRaises(ConfigurationError):
                resolve_config("size", path)

    def test_unknown_task(self):
        with self.assertRaises(ConfigurationError):
            resolve_config("smooth")


class TestMetricsReport(unittest.TestCase):
    def test_from_values(self):
        report = MetricsReport.from_values({"vertices": 10.0, "faces": 12.0, "angle_mean": 58.0})
        self.assertEqual(report.vertices, 10)
        self.assertIsInstance(report.faces, int)
        self.assertIsNone(report.size_rmse)
        self.assertEqual(report.as_dict()["angle_mean"], 58.0)


if __name__ == "__main__":
    unittest.main()
