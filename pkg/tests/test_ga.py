import numpy as np
import pytest

from upmsp.generate import GenParams, generate_instance
from upmsp.problem import compute_objectives, validate_schedule
from upmsp.solvers import AtcsrRule, GeneticAlgorithm, crossover, decode, fitness, mutate, random_chromosome
from upmsp.solvers.ga import validate_chromosome

from conftest import tiny_instance


class TestDecode:
    def test_instance_a_forward(self, instance_a):
        obj = compute_objectives(instance_a, decode(instance_a, [[0, 1]]))
        assert (obj.twt, obj.tst) == (4, 2)

    def test_instance_a_reverse(self, instance_a):
        obj = compute_objectives(instance_a, decode(instance_a, [[1, 0]]))
        assert (obj.twt, obj.tst) == (16, 4)

    def test_empty_machine_contributes_nothing(self):
        inst = tiny_instance(n=2, m=2)
        obj = compute_objectives(inst, decode(inst, [[0, 1], []]))
        assert obj.tst == 0

    def test_malformed_chromosome_rejected(self, instance_a):
        with pytest.raises(ValueError):
            decode(instance_a, [[0, 0, 1]])
        with pytest.raises(ValueError):
            decode(instance_a, [[0]])


class TestFitness:
    def test_reference_chromosome_scores_one(self, instance_a):
        ref = AtcsrRule().solve(instance_a)
        chromo = [list(s) for s in ref.schedule.sequences]
        value = fitness(instance_a, chromo, ref.objectives.twt, ref.objectives.tst, 0.5)
        assert value == pytest.approx(1.0)

    def test_zero_objectives_score_zero(self):
        inst = tiny_instance(n=2, m=1)
        assert fitness(inst, [[0, 1]], 10, 10, 0.5) == 0.0

    def test_instance_a_reverse_scores_three(self, instance_a):
        assert fitness(instance_a, [[1, 0]], 4, 2, 0.5) == pytest.approx(3.0)


def random_instances(count, n=6, m=2, delta=0.75):
    return [
        generate_instance(GenParams(n=n, m=m, elig_delta=delta, seed=seed))
        for seed in range(count)
    ]


class TestOperators:
    def test_self_crossover_preserves_objectives(self, instance_a):
        rng = np.random.default_rng(0)
        a = [[0, 1]]
        child = crossover(a, a, instance_a, rng)
        assert compute_objectives(instance_a, decode(instance_a, child)) == compute_objectives(
            instance_a, decode(instance_a, a)
        )

    def test_crossover_children_always_valid(self):
        rng = np.random.default_rng(1)
        for inst in random_instances(5):
            for _ in range(200):
                a = random_chromosome(inst, rng)
                b = random_chromosome(inst, rng)
                child = crossover(a, b, inst, rng)
                assert validate_chromosome(inst, child) == []

    def test_mutation_zero_probability_is_identity(self, instance_a):
        rng = np.random.default_rng(2)
        chromo = [[1, 0]]
        assert mutate(chromo, instance_a, rng, 0.0) == chromo

    def test_mutation_single_job_stays_on_eligible_machines(self):
        inst = tiny_instance(n=1, m=3, processing=[[2, 2, 2]], release=[0], due=[9],
                             weight=[1], setup=np.zeros((2, 1, 3), dtype=np.int64),
                             eligible=((0, 2),))
        rng = np.random.default_rng(3)
        for _ in range(50):
            out = mutate([[0], [], []], inst, rng, 1.0)
            k = next(i for i, seq in enumerate(out) if seq)
            assert k in (0, 2)

    def test_mutation_preserves_invariants(self):
        rng = np.random.default_rng(4)
        for inst in random_instances(3):
            chromo = random_chromosome(inst, rng)
            for _ in range(300):
                chromo = mutate(chromo, inst, rng, 0.7)
                assert validate_chromosome(inst, chromo) == []


class TestRunGa:
    def test_finds_optimum_on_instance_a(self, instance_a):
        result = GeneticAlgorithm(budget_ms=None, max_generations=20, seed=0).solve(instance_a)
        assert result.schedule.sequences == ((0, 1),)
        assert result.info["fitness"] == pytest.approx(1.0)

    def test_anytime_monotonicity_and_seed_bound(self):
        for inst in random_instances(4):
            for seed in range(3):
                result = GeneticAlgorithm(budget_ms=None, max_generations=15, seed=seed).solve(inst)
                history = result.info["history"]
                assert all(a >= b - 1e-12 for a, b in zip(history, history[1:]))
                assert result.info["fitness"] <= 1.0 + 1e-12

    def test_every_individual_feasible_schedule(self):
        for inst in random_instances(2):
            result = GeneticAlgorithm(budget_ms=None, max_generations=10, seed=1).solve(inst)
            assert validate_schedule(inst, result.schedule) == []

    def test_deterministic_given_seed(self):
        inst = random_instances(1, n=8)[0]
        ga = GeneticAlgorithm(budget_ms=None, max_generations=12, seed=9)
        a = ga.solve(inst)
        b = ga.solve(inst)
        assert a.schedule == b.schedule
        assert a.info["history"] == b.info["history"]

    def test_invalid_params_rejected(self, instance_a):
        with pytest.raises(ValueError):
            GeneticAlgorithm(population=1).solve(instance_a)
        with pytest.raises(ValueError):
            GeneticAlgorithm(elites=0).solve(instance_a)
        with pytest.raises(ValueError):
            GeneticAlgorithm(budget_ms=None, max_generations=None).solve(instance_a)
