#!/usr/bin/env python3
"""
adam.py

Adam over the flattened parameter vector (V.ravel(), W) with bias-corrected
moment estimates.

License: GPL-3.0
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from libs.errors import NumericFailure

logger = logging.getLogger(__name__)


@dataclass
class OptimizerState:
    """First/second moments, step counter and hyperparameters."""

    size: int
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: np.ndarray = field(default=None)
    v: np.ndarray = field(default=None)

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.m is None:
            self.m = np.zeros(self.size)
        if self.v is None:
            self.v = np.zeros(self.size)


def adam_update(state: OptimizerState, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """
    One Adam step; returns the new parameters and advances `state`.

    Raises:
        NumericFailure: the gradient is not finite (state left untouched).
    """
    grad = np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(grad)):
        raise NumericFailure("non-finite gradient", "adam")
    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * (grad * grad)
    m_hat = state.m / (1.0 - state.beta1 ** state.step)
    v_hat = state.v / (1.0 - state.beta2 ** state.step)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
