#!/usr/bin/env python3
"""
test_adam.py

Tests for the Adam update.
"""

import unittest

import numpy as np

from libs.errors import NumericFailure
from pipelines.adam import OptimizerState, adam_update


class TestAdam(unittest.TestCase):
    def test_zero_gradient_keeps_parameters(self):
        params = np.array([0.3, -0.2, 0.1])
        out = adam_update(OptimizerState(3), params, np.zeros(3))
        np.testing.assert_array_equal(out, params)

    def test_first_step_is_lr_times_sign(self):
        state = OptimizerState(3, lr=1e-4)
        out = adam_update(state, np.zeros(3), np.array([2.0, -0.5, 1e-3]))
        np.testing.assert_allclose(out, [-1e-4, 1e-4, -1e-4], rtol=1e-4)
        self.assertEqual(state.step, 1)

    def test_matches_the_textbook_recurrence(self):
        rng = np.random.default_rng(0)
        lr, b1, b2, eps = 1e-3, 0.9, 0.999, 1e-8
        state = OptimizerState(4, lr, b1, b2, eps)
        params = rng.normal(size=4)
        expected = params.copy()
        m = np.zeros(4)
        v = np.zeros(4)
        for t in range(1, 6):
            g = rng.normal(size=4)
            params = adam_update(state, params, g)
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            expected = expected - lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
        np.testing.assert_allclose(params, expected, rtol=1e-12)

    def test_non_finite_gradient_leaves_state(self):
        state = OptimizerState(2)
        adam_update(state, np.zeros(2), np.ones(2))
        m_before = state.m.copy()
        with self.assertRaises(NumericFailure):
            adam_update(state, np.zeros(2), np.array([np.nan, 1.0]))
        self.assertEqual(state.step, 1)
        np.testing.assert_array_equal(state.m, m_before)

    def test_bad_hyperparameters(self):
        with self.assertRaises(ValueError):
            OptimizerState(2, lr=0.0)
        with self.assertRaises(ValueError):
            OptimizerState(2, beta1=1.0)


if __name__ == "__main__":
    unittest.main()
