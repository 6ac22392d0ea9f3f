"""Trained-policy solver: fit with PPO, then schedule greedily."""

from __future__ import annotations

import time
from typing import Callable

import numpy as np

from ..env import schedule_from_state
from ..nn.model import load_checkpoint
from ..ppo import TrainConfig, greedy_episode, train
from ..problem import ProblemInstance, compute_objectives, scalarize
from .base import BaseSolver, SolveResult


class PolicyAgent(BaseSolver):
    """PPO-trained scheduling agent.

    Either load a checkpoint or call :meth:`fit` with an instance sampler;
    afterwards :meth:`solve` runs the deterministic greedy policy.
    """

    def __init__(self, checkpoint: str | None = None, alpha: float = 1.0, beta: float = 1.0):
        self.checkpoint = checkpoint
        self.alpha = alpha
        self.beta = beta
        self.params_ = None
        self.policy_config_ = None
        self.curve_ = None
        if checkpoint is not None:
            self.params_, self.policy_config_ = load_checkpoint(checkpoint)

    def fit(
        self,
        sampler: Callable[[np.random.Generator], ProblemInstance],
        config: TrainConfig | None = None,
        checkpoint_path: str | None = None,
        curve_path: str | None = None,
        log: Callable[[str], None] | None = None,
    ) -> "PolicyAgent":
        config = config or TrainConfig(alpha=self.alpha, beta=self.beta)
        result = train(
            sampler, config, checkpoint_path=checkpoint_path, curve_path=curve_path, log=log
        )
        self.params_ = result.params
        self.policy_config_ = config.policy
        self.curve_ = result.curve
        return self

    def solve(self, inst: ProblemInstance) -> SolveResult:
        if self.params_ is None:
            raise ValueError("PolicyAgent is not fitted and has no checkpoint")
        t0 = time.perf_counter()
        final, _ = greedy_episode(
            inst, self.params_, self.policy_config_, alpha=self.alpha, beta=self.beta
        )
        wall = time.perf_counter() - t0
        schedule = schedule_from_state(final)
        obj = compute_objectives(inst, schedule)
        return SolveResult(
            schedule=schedule,
            objectives=obj,
            scalarized=scalarize(obj, self.alpha, self.beta),
            wall_s=wall,
            info={"checkpoint": self.checkpoint},
        )
