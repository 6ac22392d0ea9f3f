"""Uniform-random feasible policy, mostly a sanity floor for benchmarks."""

from __future__ import annotations

import time

import numpy as np

from ..env import random_policy, rollout
from ..problem import ProblemInstance, scalarize
from .base import BaseSolver, SolveResult


class RandomPolicy(BaseSolver):
    def __init__(self, seed: int = 0, alpha: float = 1.0, beta: float = 1.0):
        self.seed = seed
        self.alpha = alpha
        self.beta = beta

    def solve(self, inst: ProblemInstance) -> SolveResult:
        t0 = time.perf_counter()
        rng = np.random.default_rng(self.seed)
        episode = rollout(inst, random_policy(rng), alpha=self.alpha, beta=self.beta)
        wall = time.perf_counter() - t0
        return SolveResult(
            schedule=episode.schedule,
            objectives=episode.objectives,
            scalarized=scalarize(episode.objectives, self.alpha, self.beta),
            wall_s=wall,
            info={"steps": len(episode.actions)},
        )
