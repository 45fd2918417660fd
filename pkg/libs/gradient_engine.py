#!/usr/bin/env python3
"""
gradient_engine.py

Reverse-mode differentiation over the package's own primitives.

A Tape records Nodes in creation order. Each primitive computes its value with
numpy and declares a vector-Jacobian product (vjp) mapping the gradient of its
output to gradients of its parents. Replaying the tape backwards therefore
gives exact derivatives of any scalar built from these primitives, for the
piecewise-smooth branch the forward pass selected (candidate sets and argmin
choices are frozen by the caller before recording).

License: GPL-3.0
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from libs.errors import NumericFailure
from libs.geom_core import WeightedPointSet, circumcenter_system, solve_2x2

logger = logging.getLogger(__name__)

# |a - b| at or below this counts as agreement in finite_difference_check
ABSOLUTE_FLOOR = 1e-8


class Node:
    """A recorded value with an accumulated gradient."""

    __slots__ = ("value", "grad", "parents", "vjp", "name", "requires_grad")

    def __init__(self, value, parents=(), vjp=None, name="leaf", requires_grad=True) -> None:
        self.value = np.asarray(value, dtype=float)
        self.grad: Optional[np.ndarray] = None
        self.parents: Tuple["Node", ...] = tuple(parents)
        self.vjp = vjp
        self.name = name
        self.requires_grad = requires_grad

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Node({self.name}, shape={self.value.shape})"


class Tape:
    """
    Records primitives for one evaluation. Not shared across threads.
    """

    def __init__(self) -> None:
        self.nodes: List[Node] = []

    def leaf(self, value, name: str = "leaf") -> Node:
        node = Node(value, name=name)
        self.nodes.append(node)
        return node

    def constant(self, value, name: str = "constant") -> Node:
        return Node(value, name=name, requires_grad=False)

    def apply(self, name: str, value, parents: Sequence[Node], vjp: Callable) -> Node:
        """
        Record a primitive output.

        Raises:
            NumericFailure: the value contains NaN or infinity.
        """
        value = np.asarray(value, dtype=float)
        if not np.all(np.isfinite(value)):
            logger.error("non-finite output from primitive %s", name)
            raise NumericFailure(f"primitive {name} produced a non-finite value", name)
        needs = any(p.requires_grad for p in parents)
        node = Node(value, parents=parents, vjp=vjp if needs else None, name=name, requires_grad=needs)
        self.nodes.append(node)
        return node

    def backward(self, output: Node) -> None:
        """Accumulate d(output)/d(node) into every node's `grad`."""
        if output.value.size != 1:
            raise ValueError("backward needs a scalar output")
        for node in self.nodes:
            node.grad = None
        output.grad = np.ones_like(output.value)
        for node in reversed(self.nodes):
            if node.grad is None or node.vjp is None:
                continue
            parent_grads = node.vjp(node.grad)
            for parent, g in zip(node.parents, parent_grads):
                if g is None or not parent.requires_grad:
                    continue
                if not np.all(np.isfinite(g)):
                    raise NumericFailure(f"gradient through {node.name} is not finite", node.name)
                g = np.asarray(g, dtype=float).reshape(parent.value.shape)
                parent.grad = g.copy() if parent.grad is None else parent.grad + g


# ---------------------------------------------------------------------------
# Generic plumbing primitives
# ---------------------------------------------------------------------------

def take(tape: Tape, x: Node, index) -> Node:
    """Row gather x[index]; the vjp scatter-adds back."""
    index = np.asarray(index, dtype=np.int64)
    shape = x.value.shape

    def vjp(g):
        out = np.zeros(shape)
        np.add.at(out, index, g)
        return (out,)

    return tape.apply("take", x.value[index], (x,), vjp)


def add(tape: Tape, *terms: Node) -> Node:
    value = sum(t.value for t in terms)
    return tape.apply("add", value, terms, lambda g: tuple(g for _ in terms))


def scale(tape: Tape, x: Node, factor: float) -> Node:
    return tape.apply("scale", x.value * factor, (x,), lambda g: (g * factor,))


def square(tape: Tape, x: Node) -> Node:
    return tape.apply("square", x.value ** 2, (x,), lambda g: (2.0 * x.value * g,))


def total(tape: Tape, x: Node) -> Node:
    shape = x.value.shape
    return tape.apply("total", np.sum(x.value), (x,), lambda g: (np.full(shape, float(g)),))


def stack_columns(tape: Tape, columns: Sequence[Node]) -> Node:
    """Stack k nodes of shape (m,) into (m, k)."""
    value = np.stack([c.value for c in columns], axis=1)
    return tape.apply("stack", value, columns,
                      lambda g: tuple(g[:, i] for i in range(len(columns))))


def weighted_sum(tape: Tape, terms: Sequence[Node], weights: Sequence[float]) -> Node:
    value = sum(w * t.value for t, w in zip(terms, weights))
    return tape.apply("weighted_sum", value, terms, lambda g: tuple(w * g for w in weights))


# ---------------------------------------------------------------------------
# Geometry primitives
# ---------------------------------------------------------------------------

def weighted_circumcenter_op(tape: Tape, vj: Node, wj: Node, vk: Node, wk: Node,
                             vl: Node, wl: Node) -> Node:
    """
    Stacked weighted circumcenters (m, 2).

    With A c = r and lam = A^-T g:
      dvk = 2 lam0 (vk - c), dvl = 2 lam1 (vl - c), dvj = 2 (lam0 + lam1)(c - vj)
      dwj = 2 (lam0 + lam1) wj, dwk = -2 lam0 wk, dwl = -2 lam1 wl
    """
    a, r = circumcenter_system(vj.value, wj.value, vk.value, wk.value, vl.value, wl.value)
    center, det = solve_2x2(a, r)
    if np.any(det == 0.0):
        raise NumericFailure("singular circumcenter system", "weighted_circumcenter")

    def vjp(g):
        lam, _ = solve_2x2(np.swapaxes(a, -1, -2), g)
        l0 = lam[..., 0:1]
        l1 = lam[..., 1:2]
        d_vk = 2.0 * l0 * (vk.value - center)
        d_vl = 2.0 * l1 * (vl.value - center)
        d_vj = 2.0 * (l0 + l1) * (center - vj.value)
        d_wj = 2.0 * (lam[..., 0] + lam[..., 1]) * wj.value
        d_wk = -2.0 * lam[..., 0] * wk.value
        d_wl = -2.0 * lam[..., 1] * wl.value
        return d_vj, d_wj, d_vk, d_wk, d_vl, d_wl

    return tape.apply("weighted_circumcenter", center, (vj, wj, vk, wk, vl, wl), vjp)


def bisector_distance_op(tape: Tape, x: Node, vj: Node, wj: Node, vm: Node, wm: Node) -> Node:
    """
    Signed distance of x to the power bisector of (vj, wj) and (vm, wm),
    positive on the vj side: d = N / (2L) with N = pi_m(x) - pi_j(x),
    L = |vm - vj|.
    """
    diff_m = x.value - vm.value
    diff_j = x.value - vj.value
    numerator = (np.sum(diff_m ** 2, axis=-1) - wm.value ** 2) - (np.sum(diff_j ** 2, axis=-1) - wj.value ** 2)
    edge = vm.value - vj.value
    length = np.sqrt(np.sum(edge ** 2, axis=-1))
    if np.any(length == 0.0):
        raise NumericFailure("coincident bisector endpoints", "bisector_distance")
    value = numerator / (2.0 * length)

    def vjp(g):
        gn = (g / (2.0 * length))[..., None]
        # d/dL of N/(2L) is -N/(2L^2)
        gl = (-g * numerator / (2.0 * length ** 2))[..., None]
        unit = edge / length[..., None]
        d_x = gn * 2.0 * (vj.value - vm.value)
        d_vm = gn * (-2.0 * diff_m) + gl * unit
        d_vj = gn * (2.0 * diff_j) - gl * unit
        d_wm = -(g / (2.0 * length)) * 2.0 * wm.value
        d_wj = (g / (2.0 * length)) * 2.0 * wj.value
        return d_x, d_vj, d_wj, d_vm, d_wm

    return tape.apply("bisector_distance", value, (x, vj, wj, vm, wm), vjp)


def sigmoid_op(tape: Tape, d: Node, alpha: float, saturated: Optional[np.ndarray] = None) -> Node:
    """
    sigma(alpha * d). Entries flagged `saturated` are pinned to 1 with zero
    gradient (corners without competing vertices).
    """
    z = alpha * d.value
    value = 0.5 * (1.0 + np.tanh(0.5 * z))
    if saturated is not None:
        value = np.where(saturated, 1.0, value)

    def vjp(g):
        out = g * alpha * value * (1.0 - value)
        if saturated is not None:
            out = np.where(saturated, 0.0, out)
        return (out,)

    return tape.apply("sigmoid", value, (d,), vjp)


# ---------------------------------------------------------------------------
# Evaluation contract
# ---------------------------------------------------------------------------

LossExpression = Callable[[Tape, Node, Node], Node]


@dataclass
class GradientBundle:
    """Loss value with derivatives for every vertex coordinate and weight."""

    value: float
    d_positions: np.ndarray
    d_weights: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.d_positions.ravel(), self.d_weights])

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.value) and np.all(np.isfinite(self.flat())))


def evaluate_with_gradient(expr: LossExpression, ps: WeightedPointSet) -> GradientBundle:
    """
    Evaluate `expr(tape, V, W)` and back-propagate to V and W.

    Raises:
        NumericFailure: a primitive produced a non-finite value.
    """
    tape = Tape()
    positions = tape.leaf(ps.positions.copy(), name="positions")
    weights = tape.leaf(ps.weights.copy(), name="weights")
    out = expr(tape, positions, weights)
    if out.value.size != 1:
        raise ValueError("loss expression must evaluate to a scalar")
    tape.backward(out)
    d_pos = positions.grad if positions.grad is not None else np.zeros_like(ps.positions)
    d_w = weights.grad if weights.grad is not None else np.zeros_like(ps.weights)
    return GradientBundle(float(out.value), d_pos, d_w)


def evaluate_value(expr: LossExpression, ps: WeightedPointSet) -> float:
    tape = Tape()
    out = expr(tape, tape.leaf(ps.positions.copy(), "positions"), tape.leaf(ps.weights.copy(), "weights"))
    return float(out.value)


def relative_errors(analytic: np.ndarray, numeric: np.ndarray, floor: float = ABSOLUTE_FLOOR) -> np.ndarray:
    """Per-entry relative error, zero where the absolute difference is below `floor`."""
    diff = np.abs(analytic - numeric)
    denom = np.maximum(np.abs(analytic), np.abs(numeric))
    return np.where(diff <= floor, 0.0, diff / np.where(denom == 0.0, 1.0, denom))


def finite_difference_gradient(expr: LossExpression, ps: WeightedPointSet, h: float) -> np.ndarray:
    """Central differences over all 3n parameters, flattened as (V.ravel(), W)."""
    n = len(ps)
    base = np.concatenate([ps.positions.ravel(), ps.weights])
    grad = np.zeros_like(base)
    for i in range(len(base)):
        plus = base.copy()
        minus = base.copy()
        plus[i] += h
        minus[i] -= h
        f_plus = evaluate_value(expr, WeightedPointSet(plus[:2 * n].reshape(n, 2), plus[2 * n:]))
        f_minus = evaluate_value(expr, WeightedPointSet(minus[:2 * n].reshape(n, 2), minus[2 * n:]))
        grad[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def finite_difference_check(expr: LossExpression, ps: WeightedPointSet, h: float = 1e-6) -> float:
    """
    Worst relative error between the tape gradient and central differences.

    Args:
        expr: loss expression.
        ps: evaluation point.
        h: finite-difference step, > 0.

    Returns:
        float: max relative error over every coordinate and weight.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    bundle = evaluate_with_gradient(expr, ps)
    numeric = finite_difference_gradient(expr, ps, h)
    errors = relative_errors(bundle.flat(), numeric)
    worst = float(errors.max()) if errors.size else 0.0
    logger.debug("finite difference check: worst relative error %.3e", worst)
    return worst
