"""Brute-force optimal solver and Pareto enumerator for tiny instances.

Every eligible machine assignment is enumerated by mixed-radix counting
over the per-job eligible sets (last job varies fastest), and for each
assignment every per-machine permutation is visited in lexicographic
order; each leaf is timed with the canonical earliest-start semantics.
Earliest starts are optimal for fixed sequences, so the scan covers an
optimal schedule.  Ties break to the first leaf in enumeration order,
which makes results reproducible and equals lexicographic tie-breaking
on (scalarized, twt, tst, encoding).
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

from ..problem import (
    ProblemInstance,
    Schedule,
    compute_objectives,
    decode_sequences,
    scalarize,
)
from .base import BaseSolver, SolveResult

MAX_JOBS = 8
MAX_MACHINES = 3


class SizeGuardError(ValueError):
    """The instance is too large for exhaustive enumeration."""


def _check_size(inst: ProblemInstance) -> None:
    if inst.n > MAX_JOBS or inst.m > MAX_MACHINES:
        raise SizeGuardError(
            f"exact enumeration is guarded to n <= {MAX_JOBS}, m <= {MAX_MACHINES}; "
            f"got n={inst.n}, m={inst.m}"
        )


def _evaluate(inst: ProblemInstance, sequences: list[tuple[int, ...]]) -> tuple[int, int]:
    """(twt, tst) of the earliest-start timing of the given sequences."""
    twt = 0
    tst = 0
    processing = inst.processing
    release = inst.release
    due = inst.due
    weight = inst.weight
    setup = inst.setup
    for k, seq in enumerate(sequences):
        free = 0
        prev = 0
        for j in seq:
            s = int(setup[prev, j, k])
            start = max(free, int(release[j])) + s
            free = start + int(processing[j, k])
            tst += s
            late = free - int(due[j])
            if late > 0:
                twt += int(weight[j]) * late
            prev = j + 1
    return twt, tst


def _all_sequencings(inst: ProblemInstance):
    """Yield per-machine sequence tuples for every assignment and order."""
    m = inst.m
    for assignment in itertools.product(*inst.eligible) if inst.n else [()]:
        groups: list[list[int]] = [[] for _ in range(m)]
        for job, k in enumerate(assignment):
            groups[k].append(job)
        for perms in itertools.product(*(itertools.permutations(g) for g in groups)):
            yield list(perms)


def solve_exact_scalarized(
    inst: ProblemInstance, alpha: float, beta: float
) -> tuple[Schedule, float]:
    """Optimal schedule and value of ``alpha*twt + beta*tst``.

    Raises:
        SizeGuardError: beyond n=8 or m=3.
        ValueError: on invalid weights.
    """
    if alpha < 0 or beta < 0 or alpha + beta <= 0:
        raise ValueError("weights must be non-negative and not both zero")
    _check_size(inst)
    best_key = None
    best_seqs = None
    for seqs in _all_sequencings(inst):
        twt, tst = _evaluate(inst, seqs)
        key = (alpha * twt + beta * tst, twt, tst)
        if best_key is None or key < best_key:
            best_key = key
            best_seqs = seqs
    schedule = decode_sequences(inst, best_seqs)
    return schedule, float(best_key[0])


@dataclass(frozen=True)
class ParetoPoint:
    twt: int
    tst: int
    schedule: Schedule


def pareto_enumerate(inst: ProblemInstance) -> list[ParetoPoint]:
    """All nondominated (twt, tst) points with one witness schedule each.

    Minimization on both axes; the witness is the first leaf in
    enumeration order to reach the point.  No returned point weakly
    dominates another.

    Raises:
        SizeGuardError: beyond n=8 or m=3.
    """
    _check_size(inst)
    archive: list[tuple[int, int, list]] = []
    for seqs in _all_sequencings(inst):
        twt, tst = _evaluate(inst, seqs)
        dominated = any(a_twt <= twt and a_tst <= tst for a_twt, a_tst, _ in archive)
        if dominated:
            continue
        archive = [
            entry for entry in archive if not (twt <= entry[0] and tst <= entry[1])
        ]
        archive.append((twt, tst, seqs))
    archive.sort(key=lambda e: (e[0], e[1]))
    return [
        ParetoPoint(twt=twt, tst=tst, schedule=decode_sequences(inst, seqs))
        for twt, tst, seqs in archive
    ]


class ExactSolver(BaseSolver):
    """Estimator-style wrapper around the exhaustive search."""

    def __init__(self, alpha: float = 1.0, beta: float = 1.0):
        self.alpha = alpha
        self.beta = beta

    def solve(self, inst: ProblemInstance) -> SolveResult:
        t0 = time.perf_counter()
        schedule, value = solve_exact_scalarized(inst, self.alpha, self.beta)
        wall = time.perf_counter() - t0
        obj = compute_objectives(inst, schedule)
        return SolveResult(
            schedule=schedule,
            objectives=obj,
            scalarized=scalarize(obj, self.alpha, self.beta),
            wall_s=wall,
            info={"optimal_value": value},
        )
