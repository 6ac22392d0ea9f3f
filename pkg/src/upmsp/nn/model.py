"""Policy and value networks over the heterogeneous graph state.

The encoder does mean-aggregation message passing: per round, each node
type combines a linear self term with one linear term per incident edge
type, where every edge-type term is the segment mean over incoming
messages ``[neighbor_embedding ; edge_features]``, followed by ReLU.
Each edge type delivers messages to both endpoints through separate
weights.  The pooled state embedding concatenates the mean job
embedding, the mean machine embedding, and the global feature vector.

Heads: a pair-scoring MLP maps ``[h_job ; h_machine ; edge_features]``
to one logit per feasible pair, a second MLP maps the pooled embedding
to the Wait logit, and a third to the state value.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Iterator

import numpy as np

from .. import graph as G
from . import autodiff as ad
from .autodiff import Tensor
from .batch import GraphBatch

# Message channels per receiving node type: (edge type, source type).
_CHANNELS = {
    "job": (("jm", "machine"), ("js", "setup")),
    "machine": (("jm", "job"), ("ms", "setup"), ("sm", "setup")),
    "setup": (("ms", "machine"), ("js", "job"), ("sm", "machine")),
}
_EDGE_DIMS = {"jm": G.JM_FEATURES, "ms": G.MS_FEATURES, "js": G.JS_FEATURES, "sm": G.SM_FEATURES}


@dataclass(frozen=True)
class PolicyConfig:
    """Network sizes.  Defaults are the desk-scale configuration; the
    full-scale setting (4 rounds, width 128, heads 256) stays reachable
    by construction."""

    hidden: int = 32
    rounds: int = 2
    head_hidden: int = 64
    head_layers: int = 2


def _node_dims(cfg: PolicyConfig, round_idx: int) -> dict[str, int]:
    if round_idx == 0:
        return {"job": G.JOB_FEATURES, "machine": G.MACHINE_FEATURES, "setup": G.SETUP_FEATURES}
    return {"job": cfg.hidden, "machine": cfg.hidden, "setup": cfg.hidden}


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> Tensor:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return ad.parameter(rng.uniform(-bound, bound, size=(fan_in, fan_out)))


def _mlp_params(params: dict, rng, name: str, d_in: int, hidden: int, layers: int, d_out: int):
    for i in range(layers):
        params[f"{name}.{i}.W"] = _glorot(rng, d_in, hidden)
        params[f"{name}.{i}.b"] = ad.parameter(np.zeros((1, hidden)))
        d_in = hidden
    params[f"{name}.out.W"] = _glorot(rng, d_in, d_out)
    params[f"{name}.out.b"] = ad.parameter(np.zeros((1, d_out)))


def init_params(cfg: PolicyConfig, seed: int) -> dict[str, Tensor]:
    """Fresh parameter set; deterministic given the seed."""
    rng = np.random.default_rng(seed)
    params: dict[str, Tensor] = {}
    for r in range(cfg.rounds):
        dims = _node_dims(cfg, r)
        for dst, channels in _CHANNELS.items():
            params[f"enc{r}.{dst}.self.W"] = _glorot(rng, dims[dst], cfg.hidden)
            for etype, src in channels:
                params[f"enc{r}.{dst}.{etype}.W"] = _glorot(
                    rng, dims[src] + _EDGE_DIMS[etype], cfg.hidden
                )
            params[f"enc{r}.{dst}.b"] = ad.parameter(np.zeros((1, cfg.hidden)))
    pooled_dim = 2 * cfg.hidden + G.GLOBAL_FEATURES
    pair_dim = 2 * cfg.hidden + G.JM_FEATURES
    _mlp_params(params, rng, "pair", pair_dim, cfg.head_hidden, cfg.head_layers, 1)
    _mlp_params(params, rng, "wait", pooled_dim, cfg.head_hidden, cfg.head_layers, 1)
    _mlp_params(params, rng, "value", pooled_dim, cfg.head_hidden, cfg.head_layers, 1)
    # Small logit-output init keeps the initial policy near uniform over
    # feasible actions; full-scale glorot there makes it near deterministic.
    params["pair.out.W"].data *= 0.01
    params["wait.out.W"].data *= 0.01
    return params


def _mlp(x: Tensor, params: dict, name: str, layers: int) -> Tensor:
    for i in range(layers):
        x = ad.relu(ad.add(ad.matmul(x, params[f"{name}.{i}.W"]), params[f"{name}.{i}.b"]))
    return ad.add(ad.matmul(x, params[f"{name}.out.W"]), params[f"{name}.out.b"])


def _message(h_src: Tensor, edge_x: np.ndarray, src_idx, dst_idx, num_dst: int, w: Tensor) -> Tensor:
    msg = ad.concat([ad.rows(h_src, src_idx), Tensor(edge_x)], axis=1)
    return ad.matmul(ad.segment_mean(msg, dst_idx, num_dst), w)


def encode(batch: GraphBatch, params: dict, cfg: PolicyConfig) -> tuple[Tensor, Tensor, Tensor]:
    """Per-node embeddings and the pooled per-graph state embedding.

    Returns ``(h_job, h_machine, pooled)`` where pooled is
    ``(B, 2*hidden + GLOBAL_FEATURES)``.

    Raises:
        ValueError: if any graph in the batch has no machine nodes.
    """
    if (np.bincount(batch.mach_gid, minlength=batch.n_graphs) < 1).any():
        raise ValueError("encode requires at least one machine node per graph")
    hj = Tensor(batch.job_x)
    hm = Tensor(batch.mach_x)
    hs = Tensor(batch.setup_x)
    nj, nm, ns = len(batch.job_x), len(batch.mach_x), len(batch.setup_x)
    for r in range(cfg.rounds):
        p = lambda dst, part: params[f"enc{r}.{dst}.{part}"]
        new_hj = ad.add(
            ad.add(
                ad.matmul(hj, p("job", "self.W")),
                ad.add(
                    _message(hm, batch.jm_x, batch.jm_dst, batch.jm_src, nj, p("job", "jm.W")),
                    _message(hs, batch.js_x, batch.js_dst, batch.js_src, nj, p("job", "js.W")),
                ),
            ),
            p("job", "b"),
        )
        new_hm = ad.add(
            ad.add(
                ad.matmul(hm, p("machine", "self.W")),
                ad.add(
                    _message(hj, batch.jm_x, batch.jm_src, batch.jm_dst, nm, p("machine", "jm.W")),
                    ad.add(
                        _message(hs, batch.ms_x, batch.ms_dst, batch.ms_src, nm, p("machine", "ms.W")),
                        _message(hs, batch.sm_x, batch.sm_src, batch.sm_dst, nm, p("machine", "sm.W")),
                    ),
                ),
            ),
            p("machine", "b"),
        )
        new_hs = ad.add(
            ad.add(
                ad.matmul(hs, p("setup", "self.W")),
                ad.add(
                    _message(hm, batch.ms_x, batch.ms_src, batch.ms_dst, ns, p("setup", "ms.W")),
                    ad.add(
                        _message(hj, batch.js_x, batch.js_src, batch.js_dst, ns, p("setup", "js.W")),
                        _message(hm, batch.sm_x, batch.sm_dst, batch.sm_src, ns, p("setup", "sm.W")),
                    ),
                ),
            ),
            p("setup", "b"),
        )
        hj, hm, hs = ad.relu(new_hj), ad.relu(new_hm), ad.relu(new_hs)
    pooled = ad.concat(
        [
            ad.segment_mean(hj, batch.job_gid, batch.n_graphs),
            ad.segment_mean(hm, batch.mach_gid, batch.n_graphs),
            Tensor(batch.globals_x),
        ],
        axis=1,
    )
    return hj, hm, pooled


@dataclass(eq=False)
class PolicyOutput:
    """Masked action distribution and value for one batch."""

    logits: Tensor      # (B, A_max), zeros at padded slots
    logp: Tensor        # (B, A_max), zeros at padded slots
    probs: Tensor       # (B, A_max), exact zeros at padded slots
    value: Tensor       # (B, 1)
    mask: np.ndarray    # (B, A_max)


def policy_value(batch: GraphBatch, params: dict, cfg: PolicyConfig) -> PolicyOutput:
    """Score every feasible action and the state value for each graph.

    Raises:
        ValueError: if some graph has no feasible action (all-masked row).
    """
    hj, hm, pooled = encode(batch, params, cfg)
    pair_in = ad.concat(
        [ad.rows(hj, batch.pair_job), ad.rows(hm, batch.pair_mach), Tensor(batch.pair_x)],
        axis=1,
    )
    pair_logits = _mlp(pair_in, params, "pair", cfg.head_layers)
    wait_logits = ad.rows(_mlp(pooled, params, "wait", cfg.head_layers), batch.wait_row)
    flat = ad.concat([pair_logits, wait_logits], axis=0)
    row_idx = np.concatenate([batch.pair_row, batch.wait_row])
    col_idx = np.concatenate([batch.pair_col, batch.wait_col])
    logits = ad.scatter_rows_cols(flat, row_idx, col_idx, batch.mask.shape)
    logp = ad.masked_log_softmax(logits, batch.mask)
    probs = ad.mul(ad.exp(logp), Tensor(batch.mask.astype(np.float64)))
    value = _mlp(pooled, params, "value", cfg.head_layers)
    return PolicyOutput(logits=logits, logp=logp, probs=probs, value=value, mask=batch.mask)


# ---------------------------------------------------------------------------
# Optimizer and checkpoints
# ---------------------------------------------------------------------------


class Adam:
    """Adam with externally supplied step size (for linear decay)."""

    def __init__(self, params: dict[str, Tensor], beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray], lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for key, p in self.params.items():
            g = grads.get(key)
            if g is None:
                continue
            self.m[key] = b1 * self.m[key] + (1 - b1) * g
            self.v[key] = b2 * self.v[key] + (1 - b2) * g * g
            m_hat = self.m[key] / (1 - b1 ** self.t)
            v_hat = self.v[key] / (1 - b2 ** self.t)
            p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + self.eps)


def save_checkpoint(path: str | Path, params: dict[str, Tensor], cfg: PolicyConfig) -> None:
    """Versioned JSON checkpoint; round-trips parameter values exactly."""
    payload = {
        "v": 1,
        "config": asdict(cfg),
        "params": [
            {"name": k, "shape": list(p.data.shape), "data": p.data.reshape(-1).tolist()}
            for k, p in params.items()
        ],
    }
    Path(path).write_text(json.dumps(payload, separators=(",", ":")) + "\n")


def load_checkpoint(path: str | Path) -> tuple[dict[str, Tensor], PolicyConfig]:
    payload = json.loads(Path(path).read_text())
    if payload.get("v") != 1:
        raise ValueError(f"unsupported checkpoint version {payload.get('v')!r}")
    cfg = PolicyConfig(**payload["config"])
    params = {}
    for entry in payload["params"]:
        arr = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        params[entry["name"]] = ad.parameter(arr)
    return params, cfg


def iter_param_values(params: dict[str, Tensor]) -> Iterator[np.ndarray]:
    for p in params.values():
        yield p.data
