"""Composite dispatching rule: apparent tardiness cost with setups and
ready times, applied over all machines at once.

The priority index of a job-machine pair is the weighted shortest
processing time ratio discounted by three exponential look-ahead
factors: positive slack, the setup the pair would incur, and the time
until the job is released.  At each decision epoch the rule evaluates
every (visible job, idle eligible machine) pair, where visible means
queued or arriving within one mean processing time, and commits the
argmax pair; if the winning job is not released yet the machine waits.
"""

from __future__ import annotations

import time

import numpy as np

from ..env import QUEUED, UNRELEASED, Action, Assign, EnvState, WAIT, reset, schedule_from_state, step
from ..problem import ProblemInstance, compute_objectives, scalarize
from .base import BaseSolver, SolveResult


def atcsr_index(
    weight: float,
    processing: float,
    due: float,
    release: float,
    setup: float,
    t: float,
    p_bar_ctx: float,
    s_bar_ctx: float,
    k1: float = 2.0,
    k2: float = 0.5,
    k3: float = 1.0,
) -> float:
    """Priority index of one job-machine pair at time ``t``.

    A non-finite due date means "no due date": the slack factor is 1 by
    convention, so the index reduces to pure weighted-shortest-processing
    ordering when setups and release delays vanish.  With ``s_bar_ctx``
    equal to 0 the setup factor is defined as 1.
    """
    return float(
        _index_vector(
            np.array([weight], dtype=np.float64),
            np.array([processing], dtype=np.float64),
            np.array([due], dtype=np.float64),
            np.array([release], dtype=np.float64),
            np.array([setup], dtype=np.float64),
            t,
            p_bar_ctx,
            s_bar_ctx,
            k1,
            k2,
            k3,
        )[0]
    )


def _index_vector(w, p, d, r, s, t, p_bar, s_bar, k1, k2, k3) -> np.ndarray:
    if min(k1, k2, k3) <= 0:
        raise ValueError("index scaling parameters must be positive")
    ready = np.maximum(r, t)
    slack = np.maximum(d - p - ready, 0.0)
    slack_factor = np.where(np.isfinite(d), np.exp(-slack / (k1 * p_bar)), 1.0)
    setup_factor = np.exp(-s / (k2 * s_bar)) if s_bar > 0 else np.ones_like(s)
    wait_factor = np.exp(-np.maximum(r - t, 0.0) / (k3 * p_bar))
    return (w / p) * slack_factor * setup_factor * wait_factor


class AtcsrRule(BaseSolver):
    """Dispatching baseline; parameters are the three look-ahead scalings
    plus the objective weights used for reporting."""

    def __init__(self, k1: float = 2.0, k2: float = 0.5, k3: float = 1.0,
                 alpha: float = 1.0, beta: float = 1.0):
        self.k1 = k1
        self.k2 = k2
        self.k3 = k3
        self.alpha = alpha
        self.beta = beta

    def dispatch(self, state: EnvState) -> Action:
        """Pick the next action at a decision epoch.

        Evaluates the index over all candidate pairs; ties break toward
        the lowest job index, then the lowest machine index.  Returns
        Wait when the winning candidate is unreleased or when no idle
        eligible machine exists for any visible job.

        Raises:
            ValueError: if the episode is done.
        """
        if state.done:
            raise ValueError("no feasible action: episode is done")
        inst = state.inst
        now = state.now
        visible = np.nonzero(
            (state.jstatus == QUEUED)
            | ((state.jstatus == UNRELEASED) & (inst.release <= now + inst.p_bar))
        )[0]
        idle = state.free_at <= now
        jobs, machines = [], []
        for j in visible:
            for k in inst.eligible[j]:
                if idle[k]:
                    jobs.append(int(j))
                    machines.append(int(k))
        if not jobs:
            return WAIT
        jobs_arr = np.array(jobs)
        mach_arr = np.array(machines)
        p = inst.processing[jobs_arr, mach_arr].astype(np.float64)
        s = inst.setup[state.last[mach_arr] + 1, jobs_arr, mach_arr].astype(np.float64)
        p_bar_ctx = float(p.mean())
        s_bar_ctx = float(s.mean())
        index = _index_vector(
            inst.weight[jobs_arr].astype(np.float64),
            p,
            inst.due[jobs_arr].astype(np.float64),
            inst.release[jobs_arr].astype(np.float64),
            s,
            float(now),
            p_bar_ctx,
            s_bar_ctx,
            self.k1,
            self.k2,
            self.k3,
        )
        best = int(np.argmax(index))  # candidates are (job asc, machine asc); first max wins
        j, k = jobs[best], machines[best]
        if state.jstatus[j] == UNRELEASED:
            return WAIT
        return Assign(j, k)

    def solve(self, inst: ProblemInstance) -> SolveResult:
        t0 = time.perf_counter()
        state = reset(inst, alpha=self.alpha, beta=self.beta)
        while not state.done:
            state = step(state, self.dispatch(state)).state
        wall = time.perf_counter() - t0
        schedule = schedule_from_state(state)
        obj = compute_objectives(inst, schedule)
        return SolveResult(
            schedule=schedule,
            objectives=obj,
            scalarized=scalarize(obj, self.alpha, self.beta),
            wall_s=wall,
            info={"k1": self.k1, "k2": self.k2, "k3": self.k3},
        )
