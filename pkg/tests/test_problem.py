import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from upmsp.generate import GenParams, generate_instance
from upmsp.problem import (
    InfeasibleScheduleError,
    ObjectiveValues,
    ProblemInstance,
    Schedule,
    compute_objectives,
    decode_sequences,
    instance_from_dict,
    instance_to_dict,
    scalarize,
    validate_instance,
    validate_schedule,
)

from conftest import tiny_instance


class TestValidateInstance:
    def test_well_formed_instance_is_clean(self):
        assert validate_instance(tiny_instance()) == []

    def test_empty_eligible_set_names_the_job(self):
        inst = tiny_instance(eligible=((0,), ()))
        report = validate_instance(inst)
        assert any("job 1" in msg for msg in report)

    def test_zero_processing_time_names_the_bound(self):
        p = np.ones((2, 1), dtype=np.int64)
        p[0, 0] = 0
        report = validate_instance(tiny_instance(processing=p))
        assert any("processing" in msg for msg in report)

    def test_out_of_range_eligibility(self):
        inst = tiny_instance(eligible=((0,), (5,)))
        assert any("job 1" in msg for msg in validate_instance(inst))

    def test_negative_setup(self):
        setup = np.zeros((3, 2, 1), dtype=np.int64)
        setup[1, 0, 0] = -1
        assert any("setup" in msg for msg in validate_instance(tiny_instance(setup=setup)))


class TestObjectives:
    def test_all_jobs_on_time_means_zero_twt(self):
        inst = tiny_instance()
        sched = decode_sequences(inst, [[0, 1]])
        assert compute_objectives(inst, sched).twt == 0

    def test_single_job_initial_setup_counts(self):
        setup = np.zeros((2, 1, 1), dtype=np.int64)
        setup[0, 0, 0] = 2
        inst = tiny_instance(n=1, m=1, setup=setup, eligible=((0,),),
                             processing=[[5]], release=[0], due=[100], weight=[1])
        sched = decode_sequences(inst, [[0]])
        assert compute_objectives(inst, sched) == ObjectiveValues(twt=0, tst=2)

    def test_instance_a_forward_order(self, instance_a):
        sched = decode_sequences(instance_a, [[0, 1]])
        assert sched.completion.tolist() == [6, 10]
        assert compute_objectives(instance_a, sched) == ObjectiveValues(twt=4, tst=2)

    def test_instance_a_reverse_order(self, instance_a):
        sched = decode_sequences(instance_a, [[1, 0]])
        assert sched.completion.tolist() == [12, 5]
        assert compute_objectives(instance_a, sched) == ObjectiveValues(twt=16, tst=4)

    def test_infeasible_schedule_raises_with_first_violation(self, instance_a):
        sched = decode_sequences(instance_a, [[0, 1]])
        broken = Schedule(
            sequences=sched.sequences,
            machine=sched.machine,
            setup_start=sched.setup_start,
            start=np.array([1, 6]),  # job 1 starts before completion 6 + setup 1
            completion=np.array([6, 9]),
        )
        with pytest.raises(InfeasibleScheduleError):
            compute_objectives(instance_a, broken)


class TestValidateSchedule:
    def test_instance_a_schedule_is_clean(self, instance_a):
        assert validate_schedule(instance_a, decode_sequences(instance_a, [[0, 1]])) == []

    def test_overlap_violation(self, instance_a):
        good = decode_sequences(instance_a, [[0, 1]])
        bad = Schedule(
            sequences=good.sequences,
            machine=good.machine,
            setup_start=good.setup_start,
            start=np.array([1, 6]),
            completion=np.array([6, 9]),
        )
        report = validate_schedule(instance_a, bad)
        assert any("setup" in msg for msg in report)

    def test_eligibility_violation(self):
        inst = tiny_instance(n=2, m=2, eligible=((0,), (0,)))
        sched = decode_sequences(inst, [[0], [1]])
        report = validate_schedule(inst, sched)
        assert any("eligible" in msg for msg in report)

    def test_missing_and_duplicate_jobs(self, instance_a):
        sched = decode_sequences(instance_a, [[0, 1]])
        missing = Schedule(
            sequences=((0,),),
            machine=sched.machine,
            setup_start=sched.setup_start,
            start=sched.start,
            completion=sched.completion,
        )
        assert any("does not appear" in msg for msg in validate_schedule(instance_a, missing))

    def test_release_violation(self):
        inst = tiny_instance(release=np.array([5, 0]))
        sched = decode_sequences(inst, [[1, 0]])
        hacked = Schedule(
            sequences=sched.sequences,
            machine=sched.machine,
            setup_start=sched.setup_start,
            start=np.array([2, 0]),
            completion=np.array([3, 1]),
        )
        assert any("release" in msg for msg in validate_schedule(inst, hacked))


class TestScalarize:
    def test_examples(self):
        obj = ObjectiveValues(twt=4, tst=2)
        assert scalarize(obj, 1, 1) == 6
        assert scalarize(obj, 1, 0) == 4
        assert scalarize(ObjectiveValues(0, 0), 0.3, 0.7) == 0

    def test_both_weights_zero_rejected(self):
        with pytest.raises(ValueError):
            scalarize(ObjectiveValues(1, 1), 0, 0)

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            scalarize(ObjectiveValues(1, 1), -1, 2)


def _random_instance(seed: int, n=4, m=2) -> ProblemInstance:
    return generate_instance(GenParams(n=n, m=m, tau=0.4, range_r=0.6, seed=seed))


class TestProperties:
    @given(st.integers(0, 10_000), st.data())
    @settings(max_examples=30, deadline=None)
    def test_machine_relabeling_invariance(self, seed, data):
        inst = _random_instance(seed)
        perm = data.draw(st.permutations(range(inst.m)))
        perm = list(perm)
        inv = np.argsort(perm)
        relabeled = ProblemInstance(
            processing=inst.processing[:, perm],
            release=inst.release,
            due=inst.due,
            weight=inst.weight,
            setup=inst.setup[:, :, perm],
            eligible=tuple(tuple(sorted(int(inv[k]) for k in e)) for e in inst.eligible),
        )
        rng = np.random.default_rng(seed)
        seqs = [[] for _ in range(inst.m)]
        for j in rng.permutation(inst.n):
            elig = inst.eligible[int(j)]
            seqs[int(elig[int(rng.integers(len(elig)))])].append(int(j))
        obj = compute_objectives(inst, decode_sequences(inst, seqs))
        seqs_relabeled = [seqs[perm[k]] for k in range(inst.m)]
        obj2 = compute_objectives(relabeled, decode_sequences(relabeled, seqs_relabeled))
        assert obj == obj2

    @given(st.integers(0, 10_000), st.integers(0, 50))
    @settings(max_examples=30, deadline=None)
    def test_delaying_a_final_job_never_helps(self, seed, delta):
        inst = _random_instance(seed)
        rng = np.random.default_rng(seed)
        seqs = [[] for _ in range(inst.m)]
        for j in rng.permutation(inst.n):
            elig = inst.eligible[int(j)]
            seqs[int(elig[int(rng.integers(len(elig)))])].append(int(j))
        sched = decode_sequences(inst, seqs)
        base = compute_objectives(inst, sched)
        k = next(k for k, s in enumerate(seqs) if s)
        j = seqs[k][-1]  # delaying the last job on a machine keeps feasibility
        start = sched.start.copy()
        completion = sched.completion.copy()
        start[j] += delta
        completion[j] += delta
        delayed = Schedule(
            sequences=sched.sequences,
            machine=sched.machine,
            setup_start=sched.setup_start,
            start=start,
            completion=completion,
        )
        shifted = compute_objectives(inst, delayed)
        assert shifted.twt >= base.twt
        assert shifted.tst == base.tst

    def test_far_due_dates_zero_twt(self, instance_a):
        inst = ProblemInstance(
            processing=instance_a.processing,
            release=instance_a.release,
            due=np.full(2, 10**9),
            weight=instance_a.weight,
            setup=instance_a.setup,
            eligible=instance_a.eligible,
        )
        for order in ([[0, 1]], [[1, 0]]):
            assert compute_objectives(inst, decode_sequences(inst, order)).twt == 0

    def test_zero_setups_zero_tst(self):
        inst = tiny_instance(n=3, m=2)
        assert compute_objectives(inst, decode_sequences(inst, [[0, 2], [1]])).tst == 0


class TestInstanceJson:
    def test_round_trip(self, instance_a):
        d = instance_to_dict(instance_a)
        back = instance_from_dict(d)
        assert np.array_equal(back.processing, instance_a.processing)
        assert np.array_equal(back.setup, instance_a.setup)
        assert back.eligible == instance_a.eligible

    def test_field_order_is_canonical(self, instance_a):
        keys = list(instance_to_dict(instance_a).keys())
        assert keys == ["n", "m", "processing", "release", "due", "weight", "setup", "eligible", "meta"]
