"""Heterogeneous graph and global-feature views of a simulation state.

Node types: jobs (queued plus those arriving within a lookahead horizon
of one mean processing time), machines, and setup configurations.  The
generator imposes no job families, so a setup configuration is identified
with the last job processed: id 0 is the initial idle configuration and
id ``j + 1`` means "configured after job j".  Setup nodes are created
lazily, only for configurations that are some machine's current state or
some visible job's requirement.

Time-like features are differenced against the current clock and divided
by the instance mean processing time; the raw clock and scale are kept in
the snapshot ``meta`` so originals can be recovered.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .env import ASSIGNED, DONE, MACH_IDLE, MACH_SETUP, QUEUED, UNRELEASED, EnvState

JOB_FEATURES = 5
MACHINE_FEATURES = 6
SETUP_FEATURES = 1
JM_FEATURES = 3
MS_FEATURES = 1
JS_FEATURES = 1
SM_FEATURES = 1

GLOBAL_FEATURE_NAMES = (
    "queued_jobs",
    "arrivals_within_horizon",
    "tardy_committed",
    "mean_flow_time_done",
    "tst_so_far",
    "idle_machines",
    "machines_in_setup",
    "clock",
    "elapsed_fraction",
)
GLOBAL_FEATURES = len(GLOBAL_FEATURE_NAMES)


@dataclass(eq=False)
class HeteroGraph:
    """Typed-node, typed-edge snapshot of one decision epoch.

    Edge endpoints are positions into the node arrays (machines use the
    machine index directly).  Node orderings are deterministic: jobs and
    machines ascending by index, setups ascending by configuration id.
    """

    job_ids: np.ndarray      # (J,) instance job indices of the visible jobs
    job_x: np.ndarray        # (J, JOB_FEATURES)
    machine_x: np.ndarray    # (m, MACHINE_FEATURES)
    setup_ids: np.ndarray    # (S,) configuration ids, ascending
    setup_x: np.ndarray      # (S, SETUP_FEATURES)
    jm_src: np.ndarray       # job position
    jm_dst: np.ndarray       # machine index
    jm_x: np.ndarray         # (E, JM_FEATURES): processing, current setup, eligibility flag
    ms_src: np.ndarray       # machine index
    ms_dst: np.ndarray       # setup position
    ms_x: np.ndarray
    js_src: np.ndarray       # job position
    js_dst: np.ndarray       # setup position
    js_x: np.ndarray
    sm_src: np.ndarray       # setup position
    sm_dst: np.ndarray       # machine index
    sm_x: np.ndarray
    globals_x: np.ndarray    # (GLOBAL_FEATURES,)
    meta: dict = field(default_factory=dict)

    @property
    def n_jobs(self) -> int:
        return len(self.job_ids)

    @property
    def n_machines(self) -> int:
        return len(self.machine_x)

    @property
    def n_setups(self) -> int:
        return len(self.setup_ids)


def _schedule_horizon(state: EnvState) -> float:
    """Loose upper bound on the final completion time under any policy."""
    inst = state.inst
    if inst.n == 0:
        return 1.0
    max_release = float(inst.release.max())
    per_job = np.where(inst.eligible_mask, inst.processing, 0).max(axis=1).sum()
    max_setup = float(inst.setup.max()) if inst.setup.size else 0.0
    return max(1.0, max_release + float(per_job) + inst.n * max_setup)


def _current_setup_matrix(state: EnvState) -> np.ndarray:
    """(n, m) setup each job would incur right now on each machine."""
    inst = state.inst
    m = inst.m
    return inst.setup[state.last + 1, :, np.arange(m)].T


def _visible_jobs(state: EnvState) -> np.ndarray:
    inst = state.inst
    horizon = state.now + inst.p_bar
    soon = (state.jstatus == UNRELEASED) & (inst.release <= horizon)
    return np.nonzero((state.jstatus == QUEUED) | soon)[0]


def global_features(state: EnvState) -> np.ndarray:
    """Fixed-order global summary vector.

    Order: queued count, arrivals within the horizon, tardy committed
    jobs, mean flow time of completed jobs (0 if none), setup time so
    far, idle machines, machines in setup, clock, elapsed fraction.
    """
    inst = state.inst
    p_bar = inst.p_bar
    queued = int(np.sum(state.jstatus == QUEUED))
    soon = int(np.sum((state.jstatus == UNRELEASED) & (inst.release <= state.now + p_bar)))
    committed = state.jstatus >= ASSIGNED
    tardy = int(np.sum(committed & (state.completion > inst.due)))
    done = state.jstatus == DONE
    flow = float(np.mean(state.completion[done] - inst.release[done])) if done.any() else 0.0
    status = state.machine_status()
    idle = int(np.sum(status == MACH_IDLE))
    setting = int(np.sum(status == MACH_SETUP))
    elapsed = min(1.0, max(0.0, state.now / _schedule_horizon(state)))
    return np.array(
        [
            queued,
            soon,
            tardy,
            flow / p_bar,
            state.tst / p_bar,
            idle,
            setting,
            state.now / p_bar,
            elapsed,
        ],
        dtype=np.float64,
    )


def build_graph(state: EnvState) -> HeteroGraph:
    """Snapshot the state as a heterogeneous graph.

    Raises:
        ValueError: if the episode is already done.
    """
    if state.done:
        raise ValueError("cannot build a graph for a finished episode")
    inst = state.inst
    n, m = inst.n, inst.m
    p_bar = inst.p_bar
    now = state.now

    visible = _visible_jobs(state)
    cur_setup = _current_setup_matrix(state)
    elig = inst.eligible_mask

    # Job nodes: weight, mean eligible processing, due slack, time to
    # release, cheapest setup on an idle machine (eligible fallback).
    idle_row = state.free_at <= now
    if len(visible):
        vis_elig = elig[visible]
        mean_p = np.where(vis_elig, inst.processing[visible], 0).sum(axis=1) / vis_elig.sum(axis=1)
        vis_setup = cur_setup[visible].astype(np.float64)
        idle_elig = vis_elig & idle_row[None, :]
        min_idle = np.where(idle_elig, vis_setup, np.inf).min(axis=1)
        min_any = np.where(vis_elig, vis_setup, np.inf).min(axis=1)
        min_setup = np.where(np.isfinite(min_idle), min_idle, min_any)
        job_x = np.stack(
            [
                inst.weight[visible].astype(np.float64),
                mean_p / p_bar,
                (inst.due[visible] - now) / p_bar,
                np.maximum(inst.release[visible] - now, 0) / p_bar,
                min_setup / p_bar,
            ],
            axis=1,
        )
    else:
        job_x = np.zeros((0, JOB_FEATURES), dtype=np.float64)

    status = state.machine_status()
    time_in_state = np.where(
        status == MACH_IDLE,
        now - state.free_at,
        np.where(status == MACH_SETUP, now - state.assign_at, now - state.proc_start),
    )
    machine_x = np.stack(
        [
            (status == MACH_IDLE).astype(np.float64),
            (status == MACH_SETUP).astype(np.float64),
            (status == 2).astype(np.float64),
            np.maximum(state.free_at - now, 0) / p_bar,
            (state.last + 1) / (n + 1),
            time_in_state / p_bar,
        ],
        axis=1,
    )

    setup_ids = np.unique(np.concatenate([state.last + 1, visible + 1]))
    setup_x = (setup_ids / (n + 1)).astype(np.float64).reshape(-1, 1)
    setup_pos = {int(c): i for i, c in enumerate(setup_ids)}

    # Job-machine edges: one per (visible job, eligible machine).
    if len(visible):
        rows, cols = np.nonzero(elig[visible])
        jm_src = rows.astype(np.int64)
        jm_dst = cols.astype(np.int64)
        jm_x = np.stack(
            [
                inst.processing[visible[rows], cols] / p_bar,
                cur_setup[visible[rows], cols] / p_bar,
                np.ones(len(rows)),
            ],
            axis=1,
        )
    else:
        jm_src = np.zeros(0, dtype=np.int64)
        jm_dst = np.zeros(0, dtype=np.int64)
        jm_x = np.zeros((0, JM_FEATURES), dtype=np.float64)

    # Machine-setup: each machine to its current configuration.
    ms_src = np.arange(m, dtype=np.int64)
    ms_dst = np.array([setup_pos[int(c)] for c in state.last + 1], dtype=np.int64)
    ms_x = ((now - state.assign_at) / p_bar).reshape(-1, 1).astype(np.float64)

    # Job-setup: each visible job to the configuration it requires.
    js_src = np.arange(len(visible), dtype=np.int64)
    js_dst = np.array([setup_pos[int(j) + 1] for j in visible], dtype=np.int64)
    js_x = inst.weight[visible].astype(np.float64).reshape(-1, 1)

    # Setup-machine: the cost for each machine to move into each visible
    # job's required configuration (same pairs as the job-machine edges).
    sm_src = js_dst[jm_src] if len(visible) else np.zeros(0, dtype=np.int64)
    sm_dst = jm_dst.copy()
    sm_x = jm_x[:, 1:2].copy() if len(jm_x) else np.zeros((0, SM_FEATURES), dtype=np.float64)

    return HeteroGraph(
        job_ids=visible.astype(np.int64),
        job_x=job_x,
        machine_x=machine_x,
        setup_ids=setup_ids.astype(np.int64),
        setup_x=setup_x,
        jm_src=jm_src,
        jm_dst=jm_dst,
        jm_x=jm_x,
        ms_src=ms_src,
        ms_dst=ms_dst,
        ms_x=ms_x,
        js_src=js_src,
        js_dst=js_dst,
        js_x=js_x,
        sm_src=sm_src,
        sm_dst=sm_dst,
        sm_x=sm_x,
        globals_x=global_features(state),
        meta={"now": int(now), "p_bar": p_bar},
    )


# ---------------------------------------------------------------------------
# Snapshot serialization (versioned JSON, lossless round trip)
# ---------------------------------------------------------------------------


def _nodes(ids: Iterable[int], x: np.ndarray) -> list[dict]:
    return [{"id": int(i), "x": row.tolist()} for i, row in zip(ids, x)]


def _edges(src_ids, dst_ids, x: np.ndarray) -> list[dict]:
    return [
        {"src": int(s), "dst": int(d), "x": row.tolist()}
        for s, d, row in zip(src_ids, dst_ids, x)
    ]


def serialize_graph(g: HeteroGraph) -> dict:
    """JSON-ready snapshot; node references use stable ids, not positions."""
    job_ids = g.job_ids
    setup_ids = g.setup_ids
    return {
        "v": 1,
        "nodes": {
            "jobs": _nodes(job_ids, g.job_x),
            "machines": _nodes(range(g.n_machines), g.machine_x),
            "setups": _nodes(setup_ids, g.setup_x),
        },
        "edges": {
            "jm": _edges(job_ids[g.jm_src], g.jm_dst, g.jm_x),
            "ms": _edges(g.ms_src, setup_ids[g.ms_dst], g.ms_x),
            "js": _edges(job_ids[g.js_src], setup_ids[g.js_dst], g.js_x),
            "sm": _edges(setup_ids[g.sm_src], g.sm_dst, g.sm_x),
        },
        "globals": g.globals_x.tolist(),
        "meta": dict(g.meta),
    }


def parse_graph(data: dict) -> HeteroGraph:
    """Inverse of :func:`serialize_graph`."""
    if data.get("v") != 1:
        raise ValueError(f"unsupported snapshot version {data.get('v')!r}")
    jobs = data["nodes"]["jobs"]
    machines = data["nodes"]["machines"]
    setups = data["nodes"]["setups"]
    job_ids = np.array([e["id"] for e in jobs], dtype=np.int64)
    setup_ids = np.array([e["id"] for e in setups], dtype=np.int64)
    job_pos = {int(i): p for p, i in enumerate(job_ids)}
    setup_pos = {int(i): p for p, i in enumerate(setup_ids)}

    def node_x(entries, width):
        if not entries:
            return np.zeros((0, width), dtype=np.float64)
        return np.array([e["x"] for e in entries], dtype=np.float64)

    def edge_arrays(entries, src_map, dst_map, width):
        src = np.array([src_map(e["src"]) for e in entries], dtype=np.int64)
        dst = np.array([dst_map(e["dst"]) for e in entries], dtype=np.int64)
        x = node_x(entries, width)
        return src, dst, x

    jm_src, jm_dst, jm_x = edge_arrays(data["edges"]["jm"], job_pos.__getitem__, int, JM_FEATURES)
    ms_src, ms_dst, ms_x = edge_arrays(data["edges"]["ms"], int, setup_pos.__getitem__, MS_FEATURES)
    js_src, js_dst, js_x = edge_arrays(data["edges"]["js"], job_pos.__getitem__, setup_pos.__getitem__, JS_FEATURES)
    sm_src, sm_dst, sm_x = edge_arrays(data["edges"]["sm"], setup_pos.__getitem__, int, SM_FEATURES)
    return HeteroGraph(
        job_ids=job_ids,
        job_x=node_x(jobs, JOB_FEATURES),
        machine_x=node_x(machines, MACHINE_FEATURES),
        setup_ids=setup_ids,
        setup_x=node_x(setups, SETUP_FEATURES),
        jm_src=jm_src,
        jm_dst=jm_dst,
        jm_x=jm_x,
        ms_src=ms_src,
        ms_dst=ms_dst,
        ms_x=ms_x,
        js_src=js_src,
        js_dst=js_dst,
        js_x=js_x,
        sm_src=sm_src,
        sm_dst=sm_dst,
        sm_x=sm_x,
        globals_x=np.array(data["globals"], dtype=np.float64),
        meta=dict(data["meta"]),
    )


def graph_to_json(g: HeteroGraph) -> str:
    return json.dumps(serialize_graph(g), separators=(",", ":"))


def graphs_equal(a: HeteroGraph, b: HeteroGraph) -> bool:
    for name in (
        "job_ids", "job_x", "machine_x", "setup_ids", "setup_x",
        "jm_src", "jm_dst", "jm_x", "ms_src", "ms_dst", "ms_x",
        "js_src", "js_dst", "js_x", "sm_src", "sm_dst", "sm_x", "globals_x",
    ):
        if not np.array_equal(getattr(a, name), getattr(b, name)):
            return False
    return a.meta == b.meta


def write_snapshots(path: str | Path, graphs: Iterable[HeteroGraph]) -> int:
    """Write one snapshot JSON per line; returns the number written."""
    count = 0
    with open(path, "w") as fh:
        for g in graphs:
            fh.write(graph_to_json(g) + "\n")
            count += 1
    return count
