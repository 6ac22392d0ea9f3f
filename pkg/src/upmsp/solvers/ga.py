"""Genetic algorithm over per-machine job sequences.

A chromosome is one ordered job list per machine; every job appears
exactly once and only on eligible machines.  Fitness is the weighted sum
of objectives normalized by a dispatching-rule reference solve on the
same instance, so a chromosome reproducing the reference schedule scores
exactly 1.  The search uses tournament selection, order crossover on the
concatenated job order with greedy repair, remove-and-reinsert mutation,
and elitism; the reference schedule seeds the initial population, which
makes the incumbent never worse than the dispatching rule.
"""

from __future__ import annotations

import time

import numpy as np

from ..problem import ProblemInstance, Schedule, compute_objectives, decode_sequences, scalarize
from .atcsr import AtcsrRule
from .base import BaseSolver, SolveResult

Chromosome = list[list[int]]


def validate_chromosome(inst: ProblemInstance, chromo: Chromosome) -> list[str]:
    report = []
    if len(chromo) != inst.m:
        return [f"chromosome must have {inst.m} machine sequences, got {len(chromo)}"]
    counts = np.zeros(inst.n, dtype=np.int64)
    for k, seq in enumerate(chromo):
        for j in seq:
            if not 0 <= j < inst.n:
                report.append(f"unknown job {j} on machine {k}")
                continue
            counts[j] += 1
            if k not in inst.eligible[j]:
                report.append(f"job {j} placed on ineligible machine {k}")
    for j in np.nonzero(counts != 1)[0]:
        report.append(f"job {j} appears {counts[j]} times")
    return report


def decode(inst: ProblemInstance, chromo: Chromosome) -> Schedule:
    """Earliest-start schedule realizing the chromosome.

    Raises:
        ValueError: on a malformed chromosome.
    """
    problems = validate_chromosome(inst, chromo)
    if problems:
        raise ValueError(f"malformed chromosome: {problems[0]}")
    return decode_sequences(inst, chromo)


def fitness(
    inst: ProblemInstance,
    chromo: Chromosome,
    twt_ref: float,
    tst_ref: float,
    alpha_fitness: float,
) -> float:
    """Normalized weighted objective, lower is better."""
    obj = compute_objectives(inst, decode(inst, chromo))
    return alpha_fitness * obj.twt / max(twt_ref, 1.0) + (1.0 - alpha_fitness) * obj.tst / max(
        tst_ref, 1.0
    )


def _objective_cost(inst: ProblemInstance, chromo: Chromosome) -> float:
    obj = compute_objectives(inst, decode_sequences(inst, chromo))
    return float(obj.twt + obj.tst)


def _cheapest_insert(inst: ProblemInstance, chromo: Chromosome, job: int) -> None:
    # Try every eligible (machine, position); keep the cheapest by twt + tst.
    best = None
    for k in inst.eligible[job]:
        for pos in range(len(chromo[k]) + 1):
            chromo[k].insert(pos, job)
            cost = _objective_cost(inst, chromo)
            if best is None or cost < best[0]:
                best = (cost, k, pos)
            chromo[k].pop(pos)
    _, k, pos = best
    chromo[k].insert(pos, job)


def repair(inst: ProblemInstance, chromo: Chromosome) -> Chromosome:
    """Restore the partition and eligibility invariants in place.

    Duplicates are dropped keeping the first occurrence, jobs sitting on
    ineligible machines are evicted, and every missing job is reinserted
    at its cheapest feasible position.
    """
    seen: set[int] = set()
    for k in range(inst.m):
        kept = []
        for j in chromo[k]:
            if j in seen or k not in inst.eligible[j]:
                continue
            seen.add(j)
            kept.append(j)
        chromo[k] = kept
    for job in range(inst.n):
        if job not in seen:
            _cheapest_insert(inst, chromo, job)
    return chromo


def crossover(a: Chromosome, b: Chromosome, inst: ProblemInstance, rng: np.random.Generator) -> Chromosome:
    """Order crossover on the concatenated job order, machine-wise split.

    A window of parent ``a``'s concatenated order stays in place; the
    remaining slots are filled in parent ``b``'s order.  The child keeps
    ``a``'s per-machine sequence lengths and is then repaired.
    """
    lengths = [len(seq) for seq in a]
    flat_a = [j for seq in a for j in seq]
    flat_b = [j for seq in b for j in seq]
    if len(flat_a) < 2:
        child_flat = list(flat_a)
    else:
        c1, c2 = sorted(rng.choice(len(flat_a) + 1, size=2, replace=False).tolist())
        window = flat_a[c1:c2]
        in_window = set(window)
        rest = [j for j in flat_b if j not in in_window]
        child_flat = rest[:c1] + window + rest[c1:]
    child: Chromosome = []
    pos = 0
    for size in lengths:
        child.append(child_flat[pos : pos + size])
        pos += size
    return repair(inst, child)


def mutate(chromo: Chromosome, inst: ProblemInstance, rng: np.random.Generator, p_mut: float) -> Chromosome:
    """With probability ``p_mut``, move one random job to a random
    feasible (machine, position)."""
    out = [list(seq) for seq in chromo]
    if inst.n == 0 or rng.random() >= p_mut:
        return out
    job = int(rng.integers(inst.n))
    for seq in out:
        if job in seq:
            seq.remove(job)
            break
    k = int(inst.eligible[job][int(rng.integers(len(inst.eligible[job])))])
    pos = int(rng.integers(len(out[k]) + 1))
    out[k].insert(pos, job)
    return out


def random_chromosome(inst: ProblemInstance, rng: np.random.Generator) -> Chromosome:
    chromo: Chromosome = [[] for _ in range(inst.m)]
    for job in rng.permutation(inst.n):
        elig = inst.eligible[int(job)]
        k = int(elig[int(rng.integers(len(elig)))])
        chromo[k].append(int(job))
    return chromo


class GeneticAlgorithm(BaseSolver):
    """Weighted-sum GA baseline.

    ``budget_ms`` bounds the wall-clock search time; ``max_generations``
    gives a deterministic stop for reproducibility studies (set
    ``budget_ms=None`` to rely on it alone).
    """

    def __init__(
        self,
        population: int = 60,
        tournament: int = 2,
        p_crossover: float = 0.9,
        p_mutation: float = 0.2,
        elites: int = 2,
        alpha_fitness: float = 0.5,
        budget_ms: float | None = 1000.0,
        max_generations: int | None = None,
        seed: int = 0,
        alpha: float = 1.0,
        beta: float = 1.0,
    ):
        self.population = population
        self.tournament = tournament
        self.p_crossover = p_crossover
        self.p_mutation = p_mutation
        self.elites = elites
        self.alpha_fitness = alpha_fitness
        self.budget_ms = budget_ms
        self.max_generations = max_generations
        self.seed = seed
        self.alpha = alpha
        self.beta = beta

    def _validate(self):
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if not 0 <= self.p_crossover <= 1 or not 0 <= self.p_mutation <= 1:
            raise ValueError("operator probabilities must lie in [0, 1]")
        if not 1 <= self.elites < self.population:
            raise ValueError("elites must satisfy 1 <= elites < population")
        if self.budget_ms is None and self.max_generations is None:
            raise ValueError("either budget_ms or max_generations must be set")

    def solve(self, inst: ProblemInstance) -> SolveResult:
        self._validate()
        t0 = time.perf_counter()
        rng = np.random.default_rng(self.seed)

        ref = AtcsrRule(alpha=self.alpha, beta=self.beta).solve(inst)
        twt_ref, tst_ref = float(ref.objectives.twt), float(ref.objectives.tst)
        seed_chromo = [list(seq) for seq in ref.schedule.sequences]

        def fit(chromo: Chromosome) -> float:
            return fitness(inst, chromo, twt_ref, tst_ref, self.alpha_fitness)

        pop = [seed_chromo] + [random_chromosome(inst, rng) for _ in range(self.population - 1)]
        scores = [fit(c) for c in pop]
        history: list[float] = [min(scores)]
        generations = 0
        deadline = None if self.budget_ms is None else t0 + self.budget_ms / 1000.0

        while True:
            if deadline is not None and time.perf_counter() >= deadline:
                break
            if self.max_generations is not None and generations >= self.max_generations:
                break
            ranked = sorted(range(len(pop)), key=lambda i: (scores[i], i))
            next_pop = [pop[i] for i in ranked[: self.elites]]
            next_scores = [scores[i] for i in ranked[: self.elites]]
            while len(next_pop) < self.population:
                parents = []
                for _ in range(2):
                    contenders = rng.integers(len(pop), size=max(self.tournament, 1))
                    best = min(contenders, key=lambda i: (scores[i], i))
                    parents.append(pop[int(best)])
                if rng.random() < self.p_crossover:
                    child = crossover(parents[0], parents[1], inst, rng)
                else:
                    child = [list(seq) for seq in parents[0]]
                child = mutate(child, inst, rng, self.p_mutation)
                next_pop.append(child)
                next_scores.append(fit(child))
            pop, scores = next_pop, next_scores
            generations += 1
            history.append(min(scores))

        best_idx = min(range(len(pop)), key=lambda i: (scores[i], i))
        schedule = decode(inst, pop[best_idx])
        obj = compute_objectives(inst, schedule)
        wall = time.perf_counter() - t0
        return SolveResult(
            schedule=schedule,
            objectives=obj,
            scalarized=scalarize(obj, self.alpha, self.beta),
            wall_s=wall,
            info={
                "generations": generations,
                "fitness": scores[best_idx],
                "history": history,
                "twt_ref": twt_ref,
                "tst_ref": tst_ref,
            },
        )
