#!/usr/bin/env python3
"""
annealing.py

Gradient-free baseline: simulated annealing over vertex positions and weights
on the discrete weighted Delaunay triangulation. Every proposal perturbs one
vertex, re-extracts the triangulation and evaluates the losses with hard
membership (unit scores on the extracted faces).

Cooling is geometric, T_k = T_0 * 0.999^k. Unless given, T_0 is chosen so
that a proposal worsening the loss by the mean initial worsening is accepted
with probability 1/2. T_0 = 0 gives greedy descent.

License: GPL-3.0
"""

import logging
import math
from typing import Optional, Tuple

import numpy as np

from libs.errors import DwdtError
from libs.geom_core import WeightedPointSet
from libs.losses import discrete_terms
from libs.soft_dwdt import extract_discrete, inclusion_scores
from libs.wdt_oracle import DiscreteMesh
from pipelines.optimizer import FinalMeshes, RunLog, RunSetup, finalize, keep_inside
from tools.manifold_check import manifold_check

logger = logging.getLogger(__name__)

COOLING = 0.999
CALIBRATION_PROPOSALS = 20
# proposal std as a fraction of the mean vertex spacing
STEP_FRACTION = 0.1


def _discrete_state(setup: RunSetup, ps: WeightedPointSet) -> Tuple[DiscreteMesh, float]:
    config = setup.config
    mesh = extract_discrete(inclusion_scores(ps, config.alpha, config.k, config.threads))
    return mesh, discrete_terms(ps.positions, mesh.faces, setup.problem)["total"]


def _propose(setup: RunSetup, ps: WeightedPointSet, rng: np.random.Generator, sigma: float) -> WeightedPointSet:
    positions = ps.positions.copy()
    weights = ps.weights.copy()
    j = int(rng.integers(len(ps)))
    if rng.random() < 0.5:
        positions[j] += rng.normal(0.0, sigma, size=2)
        positions = keep_inside(setup.surface, positions)
    else:
        weights[j] += rng.normal(0.0, sigma)
    return WeightedPointSet(positions, weights)


def _evaluate(setup: RunSetup, ps: WeightedPointSet) -> Optional[Tuple[DiscreteMesh, float]]:
    """Discrete state of a proposal, or None when it is invalid."""
    try:
        mesh, value = _discrete_state(setup, ps)
    except DwdtError as exc:
        logger.debug("rejected proposal: %s", exc)
        return None
    if not np.isfinite(value) or not manifold_check(mesh).is_manifold:
        return None
    return mesh, value


def initial_temperature(setup: RunSetup, ps: WeightedPointSet, current: float,
                        rng: np.random.Generator, sigma: float) -> float:
    """Mean worsening over a few trial proposals, divided by ln 2."""
    worse = []
    for _ in range(CALIBRATION_PROPOSALS):
        trial = _evaluate(setup, _propose(setup, ps, rng, sigma))
        if trial is not None and trial[1] > current:
            worse.append(trial[1] - current)
    if not worse:
        return 0.0
    return float(np.mean(worse)) / math.log(2.0)


def anneal(setup: RunSetup, iterations: Optional[int] = None, temperature: Optional[float] = None,
           seed: Optional[int] = None) -> Tuple[FinalMeshes, RunLog]:
    """
    Minimize the discrete losses by Metropolis moves.

    Args:
        setup: the same run setup the Adam optimizer uses.
        iterations: proposal count (the configured iteration count by default).
        temperature: initial temperature; None calibrates it, 0 is greedy.
        seed: proposal seed (the configured seed by default).

    Returns:
        tuple: (final meshes, RunLog with one row per proposal).
    """
    config = setup.config
    iterations = config.iterations if iterations is None else iterations
    rng = np.random.default_rng(config.seed if seed is None else seed)
    ps = setup.initial
    start = _evaluate(setup, ps)
    if start is None:
        raise ValueError("initial configuration has no valid discrete triangulation")
    _, current = start
    sigma = STEP_FRACTION * math.sqrt(setup.surface.boundary.area / len(ps))
    t0 = initial_temperature(setup, ps, current, rng, sigma) if temperature is None else float(temperature)
    if t0 < 0:
        raise ValueError("temperature must be non-negative")
    log = RunLog(metadata={"name": setup.name, "baseline": "sa", "initial_temperature": t0,
                           "iterations": iterations})
    logger.info("%s: annealing from loss %.6g, T0 %.6g", setup.name, current, t0)

    accepted = 0
    for k in range(iterations):
        t = t0 * COOLING ** k
        proposal = _propose(setup, ps, rng, sigma)
        trial = _evaluate(setup, proposal)
        take = False
        if trial is not None:
            delta = trial[1] - current
            if delta <= 0.0:
                take = True
            elif t > 0.0:
                take = rng.random() < math.exp(-delta / t)
        if take:
            ps, current = proposal, trial[1]
            accepted += 1
        log.append({"iteration": k, "total": current, "accepted": int(take), "temperature": t})
        if k % config.log_every == 0:
            logger.info("%s sa %d: loss %.6g, T %.3g, accepted %d", setup.name, k, current, t, accepted)

    log.metadata["accepted"] = accepted
    final = finalize(setup, ps)
    log.metadata["manifold"] = final.manifold.is_manifold
    return final, log


def simulated_annealing_baseline(setup: RunSetup, iterations: Optional[int] = None,
                                 temperature: Optional[float] = None) -> Tuple[DiscreteMesh, RunLog]:
    """The lifted annealed mesh and its log."""
    final, log = anneal(setup, iterations, temperature)
    return final.mesh3d, log
