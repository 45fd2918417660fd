#!/usr/bin/env python3
"""
gradcheck.py

Finite-difference validation of every loss gradient on seeded random
configurations. Configurations close to a branch transition are skipped:
a score near the extraction threshold, a nearly tied competitor, a triangle
score near the alignment-adjacency cutoff or a vertex near the edge of the
boundary-repulsion band.

License: GPL-3.0
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from libs.geom_core import WeightedPointSet, bisector_distances
from libs.gradient_engine import finite_difference_check
from libs.losses import ADJACENCY_CUTOFF, DEFAULT_EPSILON, TERMS, LossProblem, soft_expression
from libs.soft_dwdt import DEFAULT_ALPHA, DEFAULT_THRESHOLD, SoftTriangulation, inclusion_scores
from libs.surface_map import (
    BoundaryPolygon,
    Catenoid,
    ConstantArea,
    FieldSet,
    Parameterization,
    PlaneSurface,
    RotatingField,
)

logger = logging.getLogger(__name__)

TOLERANCE = 1e-4
STEP = 1e-6
SCORE_MARGIN = 0.05
BRANCH_MARGIN = 1e-4
MAX_ATTEMPTS_PER_CONFIG = 25


@dataclass
class LossCheck:
    """Outcome for one loss term."""

    term: str
    errors: List[float] = field(default_factory=list)
    skipped: int = 0

    @property
    def worst(self) -> float:
        return max(self.errors) if self.errors else 0.0

    @property
    def passed(self) -> bool:
        return bool(self.errors) and self.worst <= TOLERANCE


@dataclass
class GradcheckReport:
    checks: Dict[str, LossCheck]
    seed: int
    n: int

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks.values())

    def lines(self) -> List[str]:
        out = []
        for term, check in self.checks.items():
            status = "PASS" if check.passed else "FAIL"
            out.append(f"{term:<10} {status}  max rel. error {check.worst:.3e} over {len(check.errors)} "
                       f"configurations ({check.skipped} skipped near transitions)")
        return out


def competitor_gaps(soft: SoftTriangulation) -> np.ndarray:
    """
    Per corner, the distance between the nearest and second-nearest
    competitor bisectors (inf with fewer than two competitors).
    """
    ps = soft.points
    v, w = ps.positions, ps.weights
    table = soft.candidates.neighbors.indices
    t = soft.triples
    gaps = np.full((len(t), 3), np.inf)
    if len(t) == 0 or table.shape[1] < 4:
        return gaps
    for slot in range(3):
        corner = t[:, slot]
        nbrs = table[corner]
        d = bisector_distances(soft.centers[:, None, :], v[corner][:, None, :], w[corner][:, None],
                               v[nbrs], w[nbrs])
        excluded = (nbrs == t[:, (slot + 1) % 3, None]) | (nbrs == t[:, (slot + 2) % 3, None])
        d = np.sort(np.where(excluded, np.inf, d), axis=1)
        gaps[:, slot] = d[:, 1] - d[:, 0]
    return gaps


def _segment_distances(boundary: BoundaryPolygon, points: np.ndarray) -> np.ndarray:
    edge = boundary.ends - boundary.starts
    rel = points[:, None, :] - boundary.starts[None]
    t = np.clip(np.sum(rel * edge[None], axis=2) / np.sum(edge * edge, axis=1)[None], 0.0, 1.0)
    feet = boundary.starts[None] + t[..., None] * edge[None]
    return np.sort(np.linalg.norm(points[:, None, :] - feet, axis=2), axis=1)


def away_from_transitions(soft: SoftTriangulation, boundary: BoundaryPolygon, epsilon: float,
                          cutoff: float = ADJACENCY_CUTOFF) -> bool:
    """True when no branch of any loss switches within a small neighbourhood."""
    if np.any(np.abs(soft.corner_scores - DEFAULT_THRESHOLD) <= SCORE_MARGIN):
        return False
    if np.any(competitor_gaps(soft) <= BRANCH_MARGIN):
        return False
    if np.any((soft.scores > 0.5 * cutoff) & (soft.scores < 2.0 * cutoff)):
        return False
    dist = _segment_distances(boundary, soft.points.positions)
    if np.any(np.abs(dist[:, 0] - epsilon) <= BRANCH_MARGIN):
        return False
    near = dist[:, 0] < epsilon
    if dist.shape[1] > 1 and np.any(near & (dist[:, 1] - dist[:, 0] <= BRANCH_MARGIN)):
        return False
    return True


def random_configuration(surface: Parameterization, n: int, rng: np.random.Generator) -> WeightedPointSet:
    """Points uniform in the domain; squared weights uniform in [0, 0.09], scaled with the domain."""
    positions = surface.sample_domain(n, rng)
    scale = surface.boundary.diagonal / np.sqrt(2.0)
    weights = np.sqrt(rng.uniform(0.0, 0.09, size=n)) * scale
    return WeightedPointSet(positions, weights)


def check_problem(surface: Parameterization, n: int, term: str, epsilon: float) -> LossProblem:
    fields = FieldSet(ConstantArea(surface.boundary.area / (2 * n)), RotatingField())
    return LossProblem(surface, fields, {term: 1.0}, epsilon)


def run_gradcheck(terms: Optional[Sequence[str]] = None, n: int = 12, configs: int = 50, seed: int = 0,
                  alpha: float = DEFAULT_ALPHA, surface: Optional[Parameterization] = None,
                  epsilon: float = DEFAULT_EPSILON, h: float = STEP) -> GradcheckReport:
    """
    Compare tape gradients with central differences.

    Args:
        terms: loss terms to check (all by default).
        n: vertices per configuration; every vertex sees all others (k = n - 1).
        configs: accepted configurations per term.
        seed: seeds the configuration stream.
        alpha: sigmoid sharpness.
        surface: domain; the unit square by default.
        epsilon: boundary repulsion margin.
        h: finite-difference step.
    """
    terms = list(TERMS if terms is None else terms)
    unknown = set(terms) - set(TERMS)
    if unknown:
        raise ValueError(f"unknown loss terms {sorted(unknown)}")
    if n < 3:
        raise ValueError("n must be at least 3")
    surface = surface or PlaneSurface()
    rng = np.random.default_rng(seed)
    checks: Dict[str, LossCheck] = {}
    for term in terms:
        check = LossCheck(term)
        problem = check_problem(surface, n, term, epsilon)
        attempts = 0
        while len(check.errors) < configs and attempts < configs * MAX_ATTEMPTS_PER_CONFIG:
            attempts += 1
            ps = random_configuration(surface, n, rng)
            soft = inclusion_scores(ps, alpha, n - 1, threads=1)
            if not away_from_transitions(soft, surface.boundary, epsilon):
                check.skipped += 1
                continue
            check.errors.append(finite_difference_check(soft_expression(soft, problem), ps, h))
        if len(check.errors) < configs:
            logger.warning("%s: only %d of %d configurations away from transitions", term,
                           len(check.errors), configs)
        logger.info("%s: worst relative error %.3e", term, check.worst)
        checks[term] = check
    return GradcheckReport(checks, seed, n)


SURFACES = {"plane": PlaneSurface, "catenoid": Catenoid}
