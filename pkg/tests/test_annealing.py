#!/usr/bin/env python3
"""
test_annealing.py

Tests for the simulated-annealing baseline.
"""

import unittest

import numpy as np

from pipelines.annealing import anneal, simulated_annealing_baseline
from pipelines.models import resolve_config
from pipelines.optimizer import build_setup


def _setup():
    config = resolve_config("size", overrides={"n_vertices": 10, "k": 9, "iterations": 8, "seed": 5,
                                               "threads": 1})
    return build_setup(config, name="sa-test")


class TestAnnealing(unittest.TestCase):
    def test_greedy_never_increases_the_loss(self):
        final, log = anneal(_setup(), temperature=0.0)
        totals = log.totals()
        self.assertEqual(len(totals), 8)
        self.assertTrue(np.all(np.diff(totals) <= 0.0))
        self.assertEqual(log.metadata["initial_temperature"], 0.0)
        self.assertTrue(final.manifold.is_manifold)

    def test_temperature_decays_geometrically(self):
        _, log = anneal(_setup(), iterations=3, temperature=2.0)
        np.testing.assert_allclose(log.column("temperature"), [2.0, 2.0 * 0.999, 2.0 * 0.999 ** 2])

    def test_calibrated_temperature_is_non_negative(self):
        mesh, log = simulated_annealing_baseline(_setup(), iterations=2)
        self.assertGreaterEqual(log.metadata["initial_temperature"], 0.0)
        self.assertEqual(mesh.dimension, 3)

    def test_negative_temperature(self):
        with self.assertRaises(ValueError):
            anneal(_setup(), iterations=1, temperature=-1.0)


if __name__ == "__main__":
    unittest.main()
