import json

import numpy as np
import pytest

from upmsp.env import Assign, random_policy, reset, step
from upmsp.generate import GenParams, generate_instance
from upmsp.graph import (
    build_graph,
    global_features,
    graph_to_json,
    graphs_equal,
    parse_graph,
    serialize_graph,
    write_snapshots,
)
from upmsp.problem import ProblemInstance

from conftest import tiny_instance


def _mid_processing_state():
    """Off-epoch state: the only machine is mid-job, the other job is far
    beyond the lookahead horizon, so no job node is visible."""
    inst = tiny_instance(n=2, m=1, processing=[[10], [10]],
                         release=np.array([0, 1000]), due=np.array([5, 2000]))
    state = step(reset(inst), Assign(0, 0)).state
    state.now = 5  # rewind inside the busy window (step advances past it)
    state.jstatus[0] = 2
    state.jstatus[1] = 0
    assert not state.done
    return state


def random_states(seed, count, n=5, m=2):
    rng = np.random.default_rng(seed)
    policy = random_policy(rng)
    out = []
    while len(out) < count:
        inst = generate_instance(GenParams(n=n, m=m, elig_delta=0.75, seed=int(rng.integers(1 << 30))))
        state = reset(inst)
        while not state.done and len(out) < count:
            out.append(state)
            state = step(state, policy(state)).state
    return out


class TestBuildGraph:
    def test_eligibility_determines_jm_edges(self):
        inst = tiny_instance(n=1, m=3, processing=[[2, 2, 2]], release=[0], due=[9],
                             weight=[1], setup=np.zeros((2, 1, 3), dtype=np.int64),
                             eligible=((0, 2),))
        g = build_graph(reset(inst))
        assert len(g.jm_src) == 2
        assert g.jm_dst.tolist() == [0, 2]

    def test_fresh_reset_shares_idle_setup_node(self):
        inst = tiny_instance(n=2, m=3, processing=np.ones((2, 3), dtype=np.int64))
        g = build_graph(reset(inst))
        assert 0 in g.setup_ids
        assert len(g.ms_src) == 3
        assert (g.ms_dst == np.where(g.setup_ids == 0)[0][0]).all()

    def test_instance_a_after_first_assignment(self, instance_a):
        state = step(reset(instance_a), Assign(0, 0)).state
        g = build_graph(state)
        p_bar = instance_a.p_bar
        assert p_bar == 4.0
        # machine 0 carries configuration id 1 (last processed job 0)
        assert g.setup_ids.tolist() == [1, 2]
        assert g.ms_dst.tolist() == [0]
        # job 1 requires configuration id 2
        assert g.js_dst.tolist() == [1]
        # transitioning machine 0 into configuration 2 costs s(0 -> 1) = 1
        assert g.sm_src.tolist() == [1]
        assert g.sm_dst.tolist() == [0]
        assert g.sm_x.tolist() == [[1 / p_bar]]
        assert g.job_x.tolist() == [[1.0, 0.75, 1.0, 0.0, 0.25]]
        assert g.machine_x.tolist() == [[1.0, 0.0, 0.0, 0.0, 1 / 3, 0.0]]

    def test_done_state_rejected(self, instance_a):
        state = step(step(reset(instance_a), Assign(0, 0)).state, Assign(1, 0)).state
        with pytest.raises(ValueError):
            build_graph(state)

    def test_no_visible_jobs_keeps_machines(self):
        g = build_graph(_mid_processing_state())
        assert g.n_jobs == 0
        assert g.n_machines == 1
        assert len(g.jm_src) == 0


class TestGlobalFeatures:
    def test_reset_counts(self):
        inst = tiny_instance(n=3, m=2)
        v = global_features(reset(inst))
        assert v[0] == 3  # queued
        assert v[2] == 0  # tardy
        assert v[4] == 0  # tst so far

    def test_busy_machine_not_idle(self, instance_a):
        state = step(reset(instance_a), Assign(0, 0)).state
        # clock advanced to completion; machine idle again, one job done
        v = global_features(state)
        assert v[5] == 1
        assert v[2] == 1  # job 0 finished tardy
        mid = reset(instance_a)
        mid = step(mid, Assign(0, 0)).state
        mid.now = 3  # rewind inside the busy window to inspect features
        mid.jstatus[0] = 2
        assert global_features(mid)[5] == 0

    def test_no_future_arrivals(self):
        inst = tiny_instance(n=1, m=1, processing=[[4]], release=[0], due=[9],
                             weight=[1], setup=np.zeros((2, 1, 1), dtype=np.int64),
                             eligible=((0,),))
        assert global_features(reset(inst))[1] == 0

    def test_elapsed_fraction_in_unit_interval(self):
        for state in random_states(11, 40):
            frac = global_features(state)[8]
            assert 0.0 <= frac <= 1.0


class TestSerialization:
    def test_round_trip_on_random_states(self):
        for state in random_states(5, 100):
            g = build_graph(state)
            assert graphs_equal(g, parse_graph(serialize_graph(g)))

    def test_json_round_trip_through_text(self, instance_a):
        g = build_graph(reset(instance_a))
        assert graphs_equal(g, parse_graph(json.loads(graph_to_json(g))))

    def test_empty_job_section(self):
        data = serialize_graph(build_graph(_mid_processing_state()))
        assert data["nodes"]["jobs"] == []
        assert len(data["nodes"]["machines"]) == 1
        assert data["v"] == 1

    def test_instance_a_snapshot_fixture(self, instance_a):
        state = step(reset(instance_a), Assign(0, 0)).state
        data = serialize_graph(build_graph(state))
        assert data["nodes"]["jobs"] == [{"id": 1, "x": [1.0, 0.75, 1.0, 0.0, 0.25]}]
        assert data["nodes"]["setups"] == [{"id": 1, "x": [1 / 3]}, {"id": 2, "x": [2 / 3]}]
        assert data["edges"]["sm"] == [{"src": 2, "dst": 0, "x": [0.25]}]
        assert data["edges"]["ms"] == [{"src": 0, "dst": 1, "x": [1.5]}]
        assert data["edges"]["js"] == [{"src": 1, "dst": 2, "x": [1.0]}]
        assert data["meta"] == {"now": 6, "p_bar": 4.0}
        assert data["globals"] == [1, 0, 1, 1.5, 0.25, 1, 0, 1.5, 0.5]

    def test_snapshot_stream(self, tmp_path, instance_a):
        states = [reset(instance_a)]
        states.append(step(states[0], Assign(0, 0)).state)
        path = tmp_path / "snaps.jsonl"
        assert write_snapshots(path, (build_graph(s) for s in states)) == 2
        lines = path.read_text().splitlines()
        assert len(lines) == 2
        for line in lines:
            parse_graph(json.loads(line))


class TestInvariants:
    def test_determinism(self, instance_a):
        a = graph_to_json(build_graph(reset(instance_a)))
        b = graph_to_json(build_graph(reset(instance_a)))
        assert a == b

    def test_job_relabel_equivariance(self, instance_a):
        perm = [1, 0]
        inv = np.argsort(perm)
        setup = instance_a.setup
        relabeled_setup = np.zeros_like(setup)
        relabeled_setup[0] = setup[0][perm]
        for i_new, i_old in enumerate(perm):
            relabeled_setup[i_new + 1] = setup[i_old + 1][perm]
        relabeled = ProblemInstance(
            processing=instance_a.processing[perm],
            release=instance_a.release[perm],
            due=instance_a.due[perm],
            weight=instance_a.weight[perm],
            setup=relabeled_setup,
            eligible=tuple(instance_a.eligible[i] for i in perm),
        )
        g1 = build_graph(reset(instance_a))
        g2 = build_graph(reset(relabeled))
        rows1 = sorted(map(tuple, np.round(g1.job_x, 12).tolist()))
        rows2 = sorted(map(tuple, np.round(g2.job_x, 12).tolist()))
        assert rows1 == rows2
        assert np.array_equal(g1.machine_x, g2.machine_x)

    def test_all_features_finite(self):
        for state in random_states(23, 1000, n=6, m=3):
            g = build_graph(state)
            for arr in (g.job_x, g.machine_x, g.setup_x, g.jm_x, g.ms_x, g.js_x, g.sm_x, g.globals_x):
                assert np.isfinite(arr).all()
