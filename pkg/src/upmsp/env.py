"""Discrete-event simulation of the scheduling problem as an MDP.

The agent is consulted only at decision epochs: instants with at least
one idle machine and at least one released, unassigned job.  Between
epochs the clock advances automatically through release and completion
events.  Assigning a job commits its setup and processing atomically
(times are deterministic under non-preemption), so tardiness is charged
in full at assignment; Wait advances the clock to the next event for a
reward of 0.  Summed over an episode, rewards therefore telescope to
``-(alpha * TWT + beta * TST)`` exactly (times an optional scale factor).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .problem import (
    IDLE,
    ObjectiveValues,
    ProblemInstance,
    Schedule,
    compute_objectives,
    validate_instance,
)

# Job lifecycle.
UNRELEASED = 0
QUEUED = 1
ASSIGNED = 2
DONE = 3

# Machine status codes (derived, used by the state encoders).
MACH_IDLE = 0
MACH_SETUP = 1
MACH_BUSY = 2


@dataclass(frozen=True)
class Assign:
    job: int
    machine: int


@dataclass(frozen=True)
class Wait:
    pass


WAIT = Wait()

Action = Union[Assign, Wait]


@dataclass
class ActionSet:
    """Feasible actions plus a flat boolean mask.

    The mask has ``n * m + 1`` entries: pair ``(j, k)`` lives at index
    ``j * m + k`` and the final slot is Wait.
    """

    actions: list[Action]
    mask: np.ndarray


@dataclass(eq=False)
class EnvState:
    """Live simulation state at one decision epoch.

    Treated as a value: :func:`step` copies before mutating, so many
    environments can be rolled out side by side without coordination.
    """

    inst: ProblemInstance
    alpha: float
    beta: float
    reward_scale: float
    now: int
    free_at: np.ndarray       # (m,) time the machine becomes idle
    last: np.ndarray          # (m,) previous job on the machine, IDLE if none
    assign_at: np.ndarray     # (m,) when the current setup began
    proc_start: np.ndarray    # (m,) when the current job's processing began
    jstatus: np.ndarray       # (n,) UNRELEASED / QUEUED / ASSIGNED / DONE
    setup_start: np.ndarray   # (n,) per-job committed times, -1 until assigned
    start: np.ndarray
    completion: np.ndarray
    machine_of: np.ndarray
    sequences: list[list[int]]
    twt: int
    tst: int
    done: bool
    _release_order: np.ndarray = field(repr=False, default=None)
    _next_release: int = 0

    def copy(self) -> "EnvState":
        return EnvState(
            inst=self.inst,
            alpha=self.alpha,
            beta=self.beta,
            reward_scale=self.reward_scale,
            now=self.now,
            free_at=self.free_at.copy(),
            last=self.last.copy(),
            assign_at=self.assign_at.copy(),
            proc_start=self.proc_start.copy(),
            jstatus=self.jstatus.copy(),
            setup_start=self.setup_start.copy(),
            start=self.start.copy(),
            completion=self.completion.copy(),
            machine_of=self.machine_of.copy(),
            sequences=[list(s) for s in self.sequences],
            twt=self.twt,
            tst=self.tst,
            done=self.done,
            _release_order=self._release_order,
            _next_release=self._next_release,
        )

    @property
    def idle_machines(self) -> np.ndarray:
        return np.nonzero(self.free_at <= self.now)[0]

    @property
    def queued_jobs(self) -> np.ndarray:
        return np.nonzero(self.jstatus == QUEUED)[0]

    def machine_status(self) -> np.ndarray:
        """Per-machine MACH_IDLE / MACH_SETUP / MACH_BUSY at the current time."""
        idle = self.free_at <= self.now
        setting = ~idle & (self.now < self.proc_start)
        out = np.full(self.inst.m, MACH_BUSY, dtype=np.int64)
        out[setting] = MACH_SETUP
        out[idle] = MACH_IDLE
        return out


@dataclass
class StepResult:
    state: EnvState
    reward: float
    done: bool
    info: dict


def reward(delta_twt: float, setup_incurred: float, alpha: float, beta: float) -> float:
    """Immediate reward for one assignment: ``-alpha*dTWT - beta*setup``."""
    return -alpha * delta_twt - beta * setup_incurred


def reset(
    inst: ProblemInstance,
    alpha: float = 1.0,
    beta: float = 1.0,
    reward_scale: float = 1.0,
) -> EnvState:
    """Initial state: clock at the earliest release, all machines idle.

    Raises:
        ValueError: if the instance fails validation.
    """
    errors = validate_instance(inst)
    if errors:
        raise ValueError(f"invalid instance: {errors[0]}")
    n, m = inst.n, inst.m
    now = int(inst.release.min()) if n else 0
    order = np.lexsort((np.arange(n), inst.release)) if n else np.zeros(0, dtype=np.int64)
    state = EnvState(
        inst=inst,
        alpha=alpha,
        beta=beta,
        reward_scale=reward_scale,
        now=now,
        free_at=np.zeros(m, dtype=np.int64),
        last=np.full(m, IDLE, dtype=np.int64),
        assign_at=np.zeros(m, dtype=np.int64),
        proc_start=np.zeros(m, dtype=np.int64),
        jstatus=np.full(n, UNRELEASED, dtype=np.int64),
        setup_start=np.full(n, -1, dtype=np.int64),
        start=np.full(n, -1, dtype=np.int64),
        completion=np.full(n, -1, dtype=np.int64),
        machine_of=np.full(n, -1, dtype=np.int64),
        sequences=[[] for _ in range(m)],
        twt=0,
        tst=0,
        done=(n == 0),
        _release_order=order,
    )
    if not state.done:
        _advance(state)
    return state


def next_event_time(state: EnvState) -> int | None:
    """Earliest pending event: a machine completion or a job release."""
    t = None
    busy = state.free_at[state.free_at > state.now]
    if busy.size:
        t = int(busy.min())
    if state._next_release < state.inst.n:
        r = int(state.inst.release[state._release_order[state._next_release]])
        if t is None or r < t:
            t = r
    return t


def _advance(state: EnvState) -> None:
    """Advance the clock to the next decision epoch or the episode end."""
    inst = state.inst
    while True:
        while state._next_release < inst.n:
            j = state._release_order[state._next_release]
            if inst.release[j] > state.now:
                break
            if state.jstatus[j] == UNRELEASED:
                state.jstatus[j] = QUEUED
            state._next_release += 1
        completed = (state.jstatus == ASSIGNED) & (state.completion <= state.now)
        state.jstatus[completed] = DONE
        if np.all(state.jstatus == DONE):
            state.done = True
            return
        has_idle = bool(np.any(state.free_at <= state.now))
        has_queued = bool(np.any(state.jstatus == QUEUED))
        if has_idle and has_queued:
            return
        t = next_event_time(state)
        assert t is not None, "no pending events but episode is not done"
        state.now = t


def feasible_actions(state: EnvState) -> ActionSet:
    """All feasible actions at a decision epoch, plus the flat mask.

    ``Assign(j, k)`` is feasible iff job ``j`` is queued, machine ``k``
    is idle, and ``k`` is eligible for ``j``.  Wait is included iff a
    future event exists.

    Raises:
        ValueError: if the episode is already done.
    """
    if state.done:
        raise ValueError("episode is done; no actions available")
    inst = state.inst
    n, m = inst.n, inst.m
    mask = np.zeros(n * m + 1, dtype=bool)
    actions: list[Action] = []
    idle = state.free_at <= state.now
    for j in state.queued_jobs:
        for k in inst.eligible[j]:
            if idle[k]:
                actions.append(Assign(int(j), int(k)))
                mask[j * m + k] = True
    if next_event_time(state) is not None:
        actions.append(WAIT)
        mask[n * m] = True
    return ActionSet(actions=actions, mask=mask)


def step(state: EnvState, action: Action) -> StepResult:
    """Apply one action and advance to the next decision epoch.

    Raises:
        ValueError: on a done episode or an infeasible action (masking is
            the caller's duty; nothing is silently corrected here).
    """
    if state.done:
        raise ValueError("cannot step a finished episode")
    inst = state.inst
    new = state.copy()
    info: dict = {"delta_twt": 0, "setup": 0}
    if isinstance(action, Assign):
        j, k = action.job, action.machine
        if not 0 <= j < inst.n or not 0 <= k < inst.m:
            raise ValueError(f"action references unknown job or machine: {action}")
        if new.jstatus[j] != QUEUED:
            raise ValueError(f"job {j} is not queued")
        if new.free_at[k] > new.now:
            raise ValueError(f"machine {k} is busy until {new.free_at[k]}")
        if k not in inst.eligible[j]:
            raise ValueError(f"machine {k} is not eligible for job {j}")
        s = inst.setup_time(int(new.last[k]), j, k)
        setup_start = new.now
        start = setup_start + s
        completion = start + int(inst.processing[j, k])
        new.setup_start[j] = setup_start
        new.start[j] = start
        new.completion[j] = completion
        new.machine_of[j] = k
        new.jstatus[j] = ASSIGNED
        new.sequences[k].append(j)
        new.assign_at[k] = setup_start
        new.proc_start[k] = start
        new.free_at[k] = completion
        new.last[k] = j
        delta_twt = int(inst.weight[j]) * max(0, completion - int(inst.due[j]))
        new.twt += delta_twt
        new.tst += s
        r = reward(delta_twt, s, new.alpha, new.beta) * new.reward_scale
        info = {"delta_twt": delta_twt, "setup": s}
    elif isinstance(action, Wait):
        t = next_event_time(new)
        if t is None:
            raise ValueError("cannot wait: no pending events")
        new.now = t
        r = 0.0
    else:
        raise ValueError(f"unknown action {action!r}")
    _advance(new)
    return StepResult(state=new, reward=r, done=new.done, info=info)


def schedule_from_state(state: EnvState) -> Schedule:
    """Extract the realized schedule from a finished episode."""
    if not state.done:
        raise ValueError("episode is not finished")
    return Schedule(
        sequences=tuple(tuple(s) for s in state.sequences),
        machine=state.machine_of,
        setup_start=state.setup_start,
        start=state.start,
        completion=state.completion,
    )


@dataclass
class Episode:
    """Trace of one rollout: the state before each action, the action,
    its reward, and the decision-epoch time."""

    states: list[EnvState]
    actions: list[Action]
    rewards: list[float]
    final_state: EnvState
    schedule: Schedule
    objectives: ObjectiveValues

    def records(self) -> list[dict]:
        """JSON-ready trace records, one per step: {t, action, reward, now}."""
        out = []
        for t, (state, action, r) in enumerate(zip(self.states, self.actions, self.rewards)):
            a = "wait" if isinstance(action, Wait) else [action.job, action.machine]
            out.append({"t": t, "action": a, "reward": r, "now": int(state.now)})
        return out

    def total_reward(self) -> float:
        return float(sum(self.rewards))


def rollout(
    inst: ProblemInstance,
    policy: Callable[[EnvState], Action],
    alpha: float = 1.0,
    beta: float = 1.0,
    reward_scale: float = 1.0,
    max_steps: int | None = None,
) -> Episode:
    """Run a policy to completion and return the full trace.

    Any policy that only emits feasible actions terminates: each Wait
    consumes a pending event and events are only created by assignments,
    so an episode takes at most ``3n`` steps.  ``max_steps`` (default
    ``3n + 8``) guards against policies that emit infeasible actions
    upstream of the step checks.

    Raises:
        RuntimeError: if the step budget is exceeded.
    """
    state = reset(inst, alpha=alpha, beta=beta, reward_scale=reward_scale)
    budget = max_steps if max_steps is not None else 3 * inst.n + 8
    states: list[EnvState] = []
    actions: list[Action] = []
    rewards: list[float] = []
    while not state.done:
        if len(actions) >= budget:
            raise RuntimeError(f"rollout exceeded {budget} steps; policy may wait forever")
        action = policy(state)
        result = step(state, action)
        states.append(state)
        actions.append(action)
        rewards.append(result.reward)
        state = result.state
    schedule = schedule_from_state(state)
    objectives = compute_objectives(inst, schedule)
    return Episode(
        states=states,
        actions=actions,
        rewards=rewards,
        final_state=state,
        schedule=schedule,
        objectives=objectives,
    )


def random_policy(rng: np.random.Generator) -> Callable[[EnvState], Action]:
    """Uniform choice over the feasible action set (used for fuzzing)."""

    def pick(state: EnvState) -> Action:
        acts = feasible_actions(state).actions
        return acts[int(rng.integers(len(acts)))]

    return pick
