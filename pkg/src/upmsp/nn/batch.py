"""Batching of decision-epoch snapshots for the policy network.

A Snapshot pairs one heterogeneous graph with the feasible action list
taken at the same instant.  GraphBatch merges many snapshots into one
node set with per-graph segment ids (the usual big-disjoint-graph trick)
so a whole minibatch runs through the encoder as a handful of matmuls.
Action slots are laid out per graph: feasible pairs first, in the order
the environment enumerates them, then Wait if it is legal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..env import Assign, EnvState, Wait, feasible_actions
from ..graph import JM_FEATURES, HeteroGraph, build_graph


@dataclass(eq=False)
class Snapshot:
    """One decision epoch: the graph plus the feasible pair actions.

    ``pair_jobs`` holds positions into ``graph.job_ids`` (queued jobs are
    always visible), ``pair_machines`` machine indices, and ``pair_x`` the
    matching job-machine edge features.
    """

    graph: HeteroGraph
    pair_jobs: np.ndarray
    pair_machines: np.ndarray
    pair_x: np.ndarray
    wait: bool

    @property
    def n_actions(self) -> int:
        return len(self.pair_jobs) + (1 if self.wait else 0)

    @classmethod
    def from_state(cls, state: EnvState) -> "Snapshot":
        graph = build_graph(state)
        acts = feasible_actions(state).actions
        jobs = np.array([a.job for a in acts if isinstance(a, Assign)], dtype=np.int64)
        machines = np.array([a.machine for a in acts if isinstance(a, Assign)], dtype=np.int64)
        wait = bool(acts) and isinstance(acts[-1], Wait)
        jpos = np.searchsorted(graph.job_ids, jobs)
        if len(jobs):
            # The jm edge list is sorted by (job position, machine), so the
            # feature row of each feasible pair is found by key search.
            m = graph.machine_x.shape[0]
            jm_keys = graph.jm_src * m + graph.jm_dst
            idx = np.searchsorted(jm_keys, jpos * m + machines)
            pair_x = graph.jm_x[idx]
        else:
            pair_x = np.zeros((0, JM_FEATURES), dtype=np.float64)
        return cls(graph=graph, pair_jobs=jpos, pair_machines=machines, pair_x=pair_x, wait=wait)


@dataclass(eq=False)
class GraphBatch:
    """Many snapshots merged into one disjoint graph with action slots."""

    n_graphs: int
    job_x: np.ndarray
    mach_x: np.ndarray
    setup_x: np.ndarray
    job_gid: np.ndarray
    mach_gid: np.ndarray
    setup_gid: np.ndarray
    jm_src: np.ndarray
    jm_dst: np.ndarray
    jm_x: np.ndarray
    ms_src: np.ndarray
    ms_dst: np.ndarray
    ms_x: np.ndarray
    js_src: np.ndarray
    js_dst: np.ndarray
    js_x: np.ndarray
    sm_src: np.ndarray
    sm_dst: np.ndarray
    sm_x: np.ndarray
    globals_x: np.ndarray
    pair_job: np.ndarray      # global job positions, one per pair action
    pair_mach: np.ndarray     # global machine positions
    pair_x: np.ndarray
    pair_row: np.ndarray      # graph index of each pair action
    pair_col: np.ndarray      # action slot of each pair action
    wait_row: np.ndarray      # graph indices where Wait is legal
    wait_col: np.ndarray
    n_actions: np.ndarray     # (B,)
    mask: np.ndarray          # (B, max_actions) bool


def batch_snapshots(snapshots: list[Snapshot]) -> GraphBatch:
    if not snapshots:
        raise ValueError("cannot batch zero snapshots")
    b = len(snapshots)
    n_actions = np.array([s.n_actions for s in snapshots], dtype=np.int64)
    if (n_actions < 1).any():
        raise ValueError("every snapshot needs at least one feasible action")
    a_max = int(n_actions.max())

    job_off = np.zeros(b, dtype=np.int64)
    mach_off = np.zeros(b, dtype=np.int64)
    setup_off = np.zeros(b, dtype=np.int64)
    for i, s in enumerate(snapshots[:-1]):
        job_off[i + 1] = job_off[i] + s.graph.n_jobs
        mach_off[i + 1] = mach_off[i] + s.graph.n_machines
        setup_off[i + 1] = setup_off[i] + s.graph.n_setups
    if any(s.graph.n_machines == 0 for s in snapshots):
        raise ValueError("snapshot with an empty machine set")

    def cat(parts, width=None):
        parts = list(parts)
        if width is not None and all(len(p) == 0 for p in parts):
            return np.zeros((0, width), dtype=np.float64)
        return np.concatenate(parts)

    graphs = [s.graph for s in snapshots]
    mask = np.zeros((b, a_max), dtype=bool)
    for i, count in enumerate(n_actions):
        mask[i, :count] = True
    wait_rows = [i for i, s in enumerate(snapshots) if s.wait]

    return GraphBatch(
        n_graphs=b,
        job_x=cat([g.job_x for g in graphs]),
        mach_x=cat([g.machine_x for g in graphs]),
        setup_x=cat([g.setup_x for g in graphs]),
        job_gid=cat([np.full(g.n_jobs, i, dtype=np.int64) for i, g in enumerate(graphs)]),
        mach_gid=cat([np.full(g.n_machines, i, dtype=np.int64) for i, g in enumerate(graphs)]),
        setup_gid=cat([np.full(g.n_setups, i, dtype=np.int64) for i, g in enumerate(graphs)]),
        jm_src=cat([g.jm_src + job_off[i] for i, g in enumerate(graphs)]),
        jm_dst=cat([g.jm_dst + mach_off[i] for i, g in enumerate(graphs)]),
        jm_x=cat([g.jm_x for g in graphs]),
        ms_src=cat([g.ms_src + mach_off[i] for i, g in enumerate(graphs)]),
        ms_dst=cat([g.ms_dst + setup_off[i] for i, g in enumerate(graphs)]),
        ms_x=cat([g.ms_x for g in graphs]),
        js_src=cat([g.js_src + job_off[i] for i, g in enumerate(graphs)]),
        js_dst=cat([g.js_dst + setup_off[i] for i, g in enumerate(graphs)]),
        js_x=cat([g.js_x for g in graphs]),
        sm_src=cat([g.sm_src + setup_off[i] for i, g in enumerate(graphs)]),
        sm_dst=cat([g.sm_dst + mach_off[i] for i, g in enumerate(graphs)]),
        sm_x=cat([g.sm_x for g in graphs]),
        globals_x=np.stack([g.globals_x for g in graphs]),
        pair_job=cat([s.pair_jobs + job_off[i] for i, s in enumerate(snapshots)]),
        pair_mach=cat([s.pair_machines + mach_off[i] for i, s in enumerate(snapshots)]),
        pair_x=cat([s.pair_x for s in snapshots], width=JM_FEATURES),
        pair_row=cat([np.full(len(s.pair_jobs), i, dtype=np.int64) for i, s in enumerate(snapshots)]),
        pair_col=cat([np.arange(len(s.pair_jobs), dtype=np.int64) for s in snapshots]),
        wait_row=np.array(wait_rows, dtype=np.int64),
        wait_col=np.array([len(snapshots[i].pair_jobs) for i in wait_rows], dtype=np.int64),
        n_actions=n_actions,
        mask=mask,
    )
