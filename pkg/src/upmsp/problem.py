"""Data model for the unrelated parallel machine scheduling problem.

Jobs are indexed ``0..n-1`` and machines ``0..m-1``.  Sequence- and
machine-dependent setup times live in a dense ``(n+1, n, m)`` tensor:
row ``0`` holds the initial setup incurred when a job is the first one
processed on a machine (the idle pseudo-job), and row ``i+1`` holds the
changeover times out of job ``i``.  Every model quantity is an integer
and every derived time (setup start, processing start, completion) stays
integral, so feasibility checks never need float tolerances.

Timing semantics used by every solver in this package: a setup begins
only once the machine is free *and* the job is released, i.e.
``setup_start = max(machine_free, release)`` and
``start = setup_start + setup``.  Setups are never spent on jobs that
have not arrived yet.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

IDLE = -1
"""Predecessor id of a machine that has not processed any job yet."""


class InfeasibleScheduleError(ValueError):
    """Raised when an operation requires a feasible schedule but got none."""


def _int_array(values, shape_hint: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        rounded = np.rint(arr)
        if not np.array_equal(rounded, arr):
            raise ValueError(f"{shape_hint} must contain integers")
        arr = rounded
    arr = arr.astype(np.int64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """One scheduling problem: jobs, machines, and all their data.

    Attributes:
        processing: ``(n, m)`` processing times, >= 1.
        release: ``(n,)`` release dates, >= 0.
        due: ``(n,)`` due dates.
        weight: ``(n,)`` tardiness weights, >= 1.
        setup: ``(n+1, n, m)`` setup tensor, row 0 = initial setups.
        eligible: per job, sorted tuple of machines allowed to process it.
        meta: free-form provenance record (generator params, seed).
    """

    processing: np.ndarray
    release: np.ndarray
    due: np.ndarray
    weight: np.ndarray
    setup: np.ndarray
    eligible: tuple[tuple[int, ...], ...]
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "processing", _int_array(self.processing, "processing"))
        object.__setattr__(self, "release", _int_array(self.release, "release"))
        object.__setattr__(self, "due", _int_array(self.due, "due"))
        object.__setattr__(self, "weight", _int_array(self.weight, "weight"))
        object.__setattr__(self, "setup", _int_array(self.setup, "setup"))
        object.__setattr__(
            self, "eligible", tuple(tuple(sorted(int(k) for k in e)) for e in self.eligible)
        )
        mask = np.zeros((self.n, self.m), dtype=bool)
        for j, machines in enumerate(self.eligible):
            for k in machines:
                if 0 <= k < self.m:
                    mask[j, k] = True
        mask.setflags(write=False)
        object.__setattr__(self, "_eligible_mask", mask)
        p_bar = float(self.processing.mean()) if self.processing.size else 1.0
        object.__setattr__(self, "_p_bar", p_bar)

    @property
    def n(self) -> int:
        return self.processing.shape[0]

    @property
    def m(self) -> int:
        return self.processing.shape[1] if self.processing.ndim == 2 else 0

    @property
    def eligible_mask(self) -> np.ndarray:
        """Boolean ``(n, m)`` eligibility matrix."""
        return self._eligible_mask

    @property
    def p_bar(self) -> float:
        """Mean processing time over all job-machine pairs (1.0 if empty)."""
        return self._p_bar

    def setup_time(self, prev: int, job: int, machine: int) -> int:
        """Setup on ``machine`` before ``job``; ``prev`` is the previous job or IDLE."""
        return int(self.setup[prev + 1, job, machine])

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProblemInstance):
            return NotImplemented
        return (
            np.array_equal(self.processing, other.processing)
            and np.array_equal(self.release, other.release)
            and np.array_equal(self.due, other.due)
            and np.array_equal(self.weight, other.weight)
            and np.array_equal(self.setup, other.setup)
            and self.eligible == other.eligible
        )


@dataclass(frozen=True, eq=False)
class Schedule:
    """A complete assignment: per-machine job sequences plus explicit times.

    ``setup_start``, ``start`` and ``completion`` are per-job arrays; the
    recorded times may be later than the earliest feasible ones (a policy
    may deliberately leave a machine idle), so validation checks the
    timing inequalities rather than re-deriving the timeline.
    """

    sequences: tuple[tuple[int, ...], ...]
    machine: np.ndarray
    setup_start: np.ndarray
    start: np.ndarray
    completion: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "sequences", tuple(tuple(int(j) for j in s) for s in self.sequences))
        for name in ("machine", "setup_start", "start", "completion"):
            object.__setattr__(self, name, _int_array(getattr(self, name), name))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Schedule):
            return NotImplemented
        return self.sequences == other.sequences and all(
            np.array_equal(getattr(self, name), getattr(other, name))
            for name in ("machine", "setup_start", "start", "completion")
        )


@dataclass(frozen=True)
class ObjectiveValues:
    """The (total weighted tardiness, total setup time) pair of a schedule."""

    twt: int
    tst: int

    def scalarized(self, alpha: float, beta: float) -> float:
        return scalarize(self, alpha, beta)


def scalarize(obj: ObjectiveValues, alpha: float, beta: float) -> float:
    """Weighted-sum objective ``alpha*twt + beta*tst``.

    Raises:
        ValueError: if a weight is negative or both weights are zero.
    """
    if alpha < 0 or beta < 0:
        raise ValueError("scalarization weights must be non-negative")
    if alpha + beta <= 0:
        raise ValueError("at least one scalarization weight must be positive")
    return alpha * obj.twt + beta * obj.tst


def validate_instance(inst: ProblemInstance) -> list[str]:
    """Check every instance invariant; returns one message per violation.

    Never raises: an empty list means the instance is well formed.
    """
    report: list[str] = []
    n, m = inst.n, inst.m
    if inst.processing.ndim != 2:
        return [f"processing must be a 2-d (n, m) matrix, got ndim={inst.processing.ndim}"]
    if inst.release.shape != (n,):
        report.append(f"release must have shape ({n},), got {inst.release.shape}")
    if inst.due.shape != (n,):
        report.append(f"due must have shape ({n},), got {inst.due.shape}")
    if inst.weight.shape != (n,):
        report.append(f"weight must have shape ({n},), got {inst.weight.shape}")
    if inst.setup.shape != (n + 1, n, m):
        report.append(f"setup must have shape ({n + 1}, {n}, {m}), got {inst.setup.shape}")
    if len(inst.eligible) != n:
        report.append(f"eligible must list {n} jobs, got {len(inst.eligible)}")
    if report:
        return report

    bad = np.argwhere(inst.processing < 1)
    if bad.size:
        j, k = bad[0]
        report.append(f"processing time must be >= 1 (job {j}, machine {k} has {inst.processing[j, k]})")
    bad = np.argwhere(inst.release < 0)
    if bad.size:
        report.append(f"release date must be >= 0 (job {bad[0][0]})")
    bad = np.argwhere(inst.weight < 1)
    if bad.size:
        report.append(f"weight must be >= 1 (job {bad[0][0]})")
    bad = np.argwhere(inst.setup < 0)
    if bad.size:
        i, j, k = bad[0]
        report.append(f"setup time must be >= 0 (row {i}, job {j}, machine {k})")
    for j, machines in enumerate(inst.eligible):
        if not machines:
            report.append(f"job {j} has an empty eligible machine set")
        elif machines[0] < 0 or machines[-1] >= m:
            report.append(f"job {j} eligibility references a machine outside 0..{m - 1}")
    return report


def validate_schedule(inst: ProblemInstance, sched: Schedule) -> list[str]:
    """Check the schedule constraints; returns one message per violation.

    Checks: each job appears exactly once, assigned machines are eligible,
    starts respect release dates, completions equal start plus processing
    (non-preemption), and consecutive jobs on a machine leave room for the
    setup (the first job counts its initial setup from time 0, reading the
    idle pseudo-job as a predecessor completing at 0).
    """
    report: list[str] = []
    n = inst.n
    if len(sched.sequences) != inst.m:
        return [f"schedule must have {inst.m} machine sequences, got {len(sched.sequences)}"]
    seen = np.zeros(n, dtype=np.int64)
    for k, seq in enumerate(sched.sequences):
        for j in seq:
            if not 0 <= j < n:
                report.append(f"sequence on machine {k} references unknown job {j}")
                continue
            seen[j] += 1
            if sched.machine[j] != k:
                report.append(f"job {j} is sequenced on machine {k} but recorded on machine {sched.machine[j]}")
    missing = np.nonzero(seen == 0)[0]
    for j in missing:
        report.append(f"job {j} does not appear in any sequence")
    dupes = np.nonzero(seen > 1)[0]
    for j in dupes:
        report.append(f"job {j} appears {seen[j]} times across sequences")
    if report:
        return report

    for k, seq in enumerate(sched.sequences):
        prev = IDLE
        prev_completion = 0
        for j in seq:
            if k not in inst.eligible[j]:
                report.append(f"job {j} assigned to machine {k} outside its eligible set")
            s = inst.setup_time(prev, j, k)
            if sched.start[j] < inst.release[j]:
                report.append(
                    f"job {j} starts at {sched.start[j]} before its release date {inst.release[j]}"
                )
            if sched.start[j] < prev_completion + s:
                report.append(
                    f"job {j} on machine {k} starts at {sched.start[j]} but predecessor "
                    f"completes at {prev_completion} and setup takes {s}"
                )
            expected = sched.start[j] + inst.processing[j, k]
            if sched.completion[j] != expected:
                report.append(
                    f"job {j} completion {sched.completion[j]} != start + processing = {expected}"
                )
            prev = j
            prev_completion = int(sched.completion[j])
    return report


def compute_objectives(inst: ProblemInstance, sched: Schedule) -> ObjectiveValues:
    """Total weighted tardiness and total setup time of a feasible schedule.

    Raises:
        InfeasibleScheduleError: naming the first violated constraint.
    """
    violations = validate_schedule(inst, sched)
    if violations:
        raise InfeasibleScheduleError(violations[0])
    tardiness = np.maximum(0, sched.completion - inst.due)
    twt = int(np.sum(inst.weight * tardiness))
    tst = 0
    for k, seq in enumerate(sched.sequences):
        prev = IDLE
        for j in seq:
            tst += inst.setup_time(prev, j, k)
            prev = j
    return ObjectiveValues(twt=twt, tst=tst)


def decode_sequences(inst: ProblemInstance, sequences: Sequence[Sequence[int]]) -> Schedule:
    """Build the earliest-start schedule realizing the given machine sequences.

    Applies the canonical timing semantics: ``setup_start = max(machine_free,
    release)``, ``start = setup_start + setup``, ``completion = start +
    processing``.  Starting every job as early as possible is optimal for the
    given sequences because delaying a start can only increase tardiness and
    never changes the setups incurred.
    """
    n = inst.n
    machine = np.full(n, -1, dtype=np.int64)
    setup_start = np.zeros(n, dtype=np.int64)
    start = np.zeros(n, dtype=np.int64)
    completion = np.zeros(n, dtype=np.int64)
    for k, seq in enumerate(sequences):
        free = 0
        prev = IDLE
        for j in seq:
            s = inst.setup_time(prev, j, k)
            ss = max(free, int(inst.release[j]))
            machine[j] = k
            setup_start[j] = ss
            start[j] = ss + s
            completion[j] = start[j] + int(inst.processing[j, k])
            free = int(completion[j])
            prev = j
    return Schedule(
        sequences=tuple(tuple(seq) for seq in sequences),
        machine=machine,
        setup_start=setup_start,
        start=start,
        completion=completion,
    )


# ---------------------------------------------------------------------------
# Instance JSON format
# ---------------------------------------------------------------------------
# Canonical field order: n, m, processing[n][m], release[n], due[n],
# weight[n], setup[n+1][n][m], eligible[n][], meta.  Data fields are
# integers only; meta carries generator parameters and the seed.


def instance_to_dict(inst: ProblemInstance) -> dict:
    return {
        "n": inst.n,
        "m": inst.m,
        "processing": inst.processing.tolist(),
        "release": inst.release.tolist(),
        "due": inst.due.tolist(),
        "weight": inst.weight.tolist(),
        "setup": inst.setup.tolist(),
        "eligible": [list(e) for e in inst.eligible],
        "meta": dict(inst.meta),
    }


def instance_from_dict(data: dict) -> ProblemInstance:
    inst = ProblemInstance(
        processing=data["processing"],
        release=data["release"],
        due=data["due"],
        weight=data["weight"],
        setup=data["setup"],
        eligible=tuple(tuple(e) for e in data["eligible"]),
        meta=dict(data.get("meta", {})),
    )
    if inst.n != data["n"] or inst.m != data["m"]:
        raise ValueError("declared n/m do not match array shapes")
    return inst


def instance_to_json(inst: ProblemInstance) -> str:
    return json.dumps(instance_to_dict(inst), separators=(",", ":")) + "\n"


def write_instance(inst: ProblemInstance, path: str | Path) -> None:
    Path(path).write_text(instance_to_json(inst))


def read_instance(path: str | Path) -> ProblemInstance:
    return instance_from_dict(json.loads(Path(path).read_text()))


def schedule_to_dict(sched: Schedule) -> dict:
    return {
        "sequences": [list(s) for s in sched.sequences],
        "machine": sched.machine.tolist(),
        "setup_start": sched.setup_start.tolist(),
        "start": sched.start.tolist(),
        "completion": sched.completion.tolist(),
    }


def schedule_from_dict(data: dict) -> Schedule:
    return Schedule(
        sequences=tuple(tuple(s) for s in data["sequences"]),
        machine=data["machine"],
        setup_start=data["setup_start"],
        start=data["start"],
        completion=data["completion"],
    )
