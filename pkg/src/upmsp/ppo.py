"""PPO training over vectorized simulation rollouts.

The clipped-surrogate objective, generalized advantage estimation, and
minibatch epoch schedule follow the standard recipe: collect a fixed
number of steps from several actor streams, compute GAE per stream,
normalize advantages over the update batch, then run several epochs of
shuffled minibatch gradient steps with a linearly decaying step size.
Old-policy log-probabilities are stored at collection time, never
recomputed, so the importance ratio is unambiguous.

Actor streams are logical: they advance in lockstep inside one process,
which keeps runs bit-reproducible, and forward passes for action
selection are batched across the streams.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .env import Assign, EnvState, WAIT, reset, schedule_from_state, step
from .problem import ObjectiveValues, ProblemInstance, compute_objectives
from .nn import autodiff as ad
from .nn.autodiff import Tensor
from .nn.batch import Snapshot, batch_snapshots
from .nn.model import Adam, PolicyConfig, init_params, policy_value, save_checkpoint


@dataclass
class TrainConfig:
    """Training hyperparameters.

    Step budget, clip, discount, GAE lambda, epoch count, and minibatch
    size carry the standard published values; the entropy and value
    coefficients are conventional defaults and are exposed here because
    they are not pinned anywhere.
    """

    total_steps: int = 200_000
    learn_rate: float = 1e-4
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip: float = 0.2
    epochs: int = 10
    minibatch: int = 64
    actors: int = 8
    rollout_steps: int = 2048
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    alpha: float = 1.0
    beta: float = 1.0
    scale_rewards: bool = True
    reward_mode: str = "dense"
    seed: int = 0
    policy: PolicyConfig = field(default_factory=PolicyConfig)

    def validate(self) -> None:
        if not 0 < self.gamma <= 1 or not 0 < self.gae_lambda <= 1:
            raise ValueError("gamma and gae_lambda must lie in (0, 1]")
        if self.clip <= 0:
            raise ValueError("clip must be positive")
        if self.minibatch > self.rollout_steps:
            raise ValueError("minibatch cannot exceed the rollout buffer")
        if self.reward_mode != "dense":
            raise NotImplementedError(
                f"reward mode {self.reward_mode!r} is a stub; only 'dense' is implemented"
            )


def compute_gae(
    rewards: Sequence[float],
    values: Sequence[float],
    bootstrap_value: float,
    gamma: float,
    lam: float,
    dones: Sequence[bool] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Advantages and returns for one trajectory segment.

    ``A_t = sum_l (gamma*lam)^l * delta_{t+l}`` within the segment, with
    ``delta_t = r_t + gamma * V_{t+1} - V_t``; a done flag terminates the
    bootstrap chain (V of the next state is 0).  Returns are ``A + V``.
    """
    r = np.asarray(rewards, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if r.shape != v.shape:
        raise ValueError("rewards and values must have equal lengths")
    t_len = len(r)
    d = np.zeros(t_len, dtype=bool) if dones is None else np.asarray(dones, dtype=bool)
    adv = np.zeros(t_len, dtype=np.float64)
    next_value = float(bootstrap_value)
    running = 0.0
    for t in range(t_len - 1, -1, -1):
        cont = 0.0 if d[t] else 1.0
        delta = r[t] + gamma * next_value * cont - v[t]
        running = delta + gamma * lam * cont * running
        adv[t] = running
        next_value = v[t]
    return adv, adv + v


@dataclass
class RolloutBuffer:
    snapshots: list[Snapshot] = field(default_factory=list)
    actions: list[int] = field(default_factory=list)
    logp: list[float] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    dones: list[bool] = field(default_factory=list)
    env_ids: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.actions)


@dataclass
class EpisodeStat:
    total_reward: float
    twt: int
    tst: int


def _apply_action_index(state: EnvState, snapshot: Snapshot, index: int):
    if index < len(snapshot.pair_jobs):
        job = int(snapshot.graph.job_ids[snapshot.pair_jobs[index]])
        action = Assign(job, int(snapshot.pair_machines[index]))
    else:
        action = WAIT
    return step(state, action)


def _reward_scale(inst: ProblemInstance, cfg: TrainConfig) -> float:
    return 1.0 / inst.p_bar if cfg.scale_rewards else 1.0


def collect_rollout(
    states: list[EnvState],
    sampler: Callable[[np.random.Generator], ProblemInstance],
    params: dict,
    cfg: TrainConfig,
    rng: np.random.Generator,
    partial_rewards: list[float] | None = None,
) -> tuple[RolloutBuffer, list[EnvState], list[EpisodeStat], np.ndarray]:
    """Advance all actor streams until the buffer is full.

    Returns the buffer, the updated live states, episode statistics for
    episodes finished during collection, and the bootstrap value of each
    stream's final state.  ``partial_rewards`` carries reward accumulated
    by episodes still open from the previous collection window.
    """
    buffer = RolloutBuffer()
    n_actors = len(states)
    if partial_rewards is None:
        partial_rewards = [0.0] * n_actors
    stats: list[EpisodeStat] = []
    steps_per_actor = (cfg.rollout_steps + n_actors - 1) // n_actors
    with ad.no_grad():
        for _ in range(steps_per_actor):
            snapshots = [Snapshot.from_state(s) for s in states]
            out = policy_value(batch_snapshots(snapshots), params, cfg.policy)
            probs = out.probs.data
            values = out.value.data[:, 0]
            logp = out.logp.data
            for i in range(n_actors):
                n_act = snapshots[i].n_actions
                p = probs[i, :n_act]
                choice = int(rng.choice(n_act, p=p / p.sum()))
                result = _apply_action_index(states[i], snapshots[i], choice)
                buffer.snapshots.append(snapshots[i])
                buffer.actions.append(choice)
                buffer.logp.append(float(logp[i, choice]))
                buffer.values.append(float(values[i]))
                buffer.rewards.append(result.reward)
                buffer.dones.append(result.done)
                buffer.env_ids.append(i)
                partial_rewards[i] += result.reward
                if result.done:
                    final = result.state
                    obj = compute_objectives(final.inst, schedule_from_state(final))
                    stats.append(EpisodeStat(partial_rewards[i], obj.twt, obj.tst))
                    partial_rewards[i] = 0.0
                    inst = sampler(rng)
                    states[i] = reset(
                        inst, alpha=cfg.alpha, beta=cfg.beta, reward_scale=_reward_scale(inst, cfg)
                    )
                else:
                    states[i] = result.state
        bootstrap_out = policy_value(
            batch_snapshots([Snapshot.from_state(s) for s in states]), params, cfg.policy
        )
        bootstraps = bootstrap_out.value.data[:, 0].copy()
    return buffer, states, stats, bootstraps


def _advantages_for_buffer(buffer: RolloutBuffer, bootstraps: np.ndarray, cfg: TrainConfig):
    adv = np.zeros(len(buffer), dtype=np.float64)
    ret = np.zeros(len(buffer), dtype=np.float64)
    env_ids = np.asarray(buffer.env_ids)
    rewards = np.asarray(buffer.rewards, dtype=np.float64)
    values = np.asarray(buffer.values, dtype=np.float64)
    dones = np.asarray(buffer.dones, dtype=bool)
    for env_id in np.unique(env_ids):
        idx = np.nonzero(env_ids == env_id)[0]
        boot = 0.0 if dones[idx[-1]] else float(bootstraps[env_id])
        a, r = compute_gae(
            rewards[idx], values[idx], boot, cfg.gamma, cfg.gae_lambda, dones[idx]
        )
        adv[idx] = a
        ret[idx] = r
    return adv, ret


@dataclass
class Minibatch:
    snapshots: list[Snapshot]
    actions: np.ndarray
    old_logp: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray


def ppo_loss(
    mb: Minibatch,
    params: dict,
    cfg: PolicyConfig,
    clip: float,
    value_coef: float,
    entropy_coef: float,
) -> tuple[float, dict[str, np.ndarray], dict[str, float]]:
    """Clipped-surrogate loss with value and entropy terms; runs backward.

    Returns the scalar loss, the parameter gradients, and diagnostics.

    Raises:
        RuntimeError: if any importance ratio is non-finite, naming the
            offending minibatch position.
    """
    batch = batch_snapshots(mb.snapshots)
    rows = np.arange(len(mb.actions))
    out = policy_value(batch, params, cfg)
    chosen_logp = ad.gather_rows_cols(out.logp, rows, mb.actions)
    ratio = ad.exp(ad.sub(chosen_logp, Tensor(mb.old_logp.reshape(-1, 1))))
    if not np.isfinite(ratio.data).all():
        bad = int(np.nonzero(~np.isfinite(ratio.data[:, 0]))[0][0])
        raise RuntimeError(f"non-finite importance ratio at minibatch position {bad}")
    adv = Tensor(mb.advantages.reshape(-1, 1))
    surrogate = ad.minimum(ad.mul(ratio, adv), ad.mul(ad.clip(ratio, 1 - clip, 1 + clip), adv))
    policy_loss = ad.neg(ad.mean(surrogate))
    verr = ad.sub(out.value, Tensor(mb.returns.reshape(-1, 1)))
    value_loss = ad.mean(ad.mul(verr, verr))
    entropy = ad.neg(ad.mean(ad.rowsum(ad.mul(out.probs, out.logp))))
    loss = ad.add(
        ad.add(policy_loss, ad.mul(value_loss, value_coef)),
        ad.neg(ad.mul(entropy, entropy_coef)),
    )
    for p in params.values():
        p.zero_grad()
    loss.backward()
    grads = {k: p.grad for k, p in params.items() if p.grad is not None}
    diag = {
        "loss": float(loss.data),
        "policy_loss": float(policy_loss.data),
        "value_loss": float(value_loss.data),
        "entropy": float(entropy.data),
        "mean_abs_ratio_dev": float(np.abs(ratio.data - 1.0).mean()),
    }
    return float(loss.data), grads, diag


@dataclass
class TrainResult:
    params: dict
    config: TrainConfig
    curve: list[dict]
    episodes: list[EpisodeStat]


CURVE_FIELDS = ("update", "steps", "mean_return", "mean_twt", "mean_tst", "lr")


def write_curve(path: str | Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CURVE_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in CURVE_FIELDS})


def train(
    sampler: Callable[[np.random.Generator], ProblemInstance],
    config: TrainConfig,
    checkpoint_path: str | Path | None = None,
    curve_path: str | Path | None = None,
    log: Callable[[str], None] | None = None,
) -> TrainResult:
    """Run the full PPO loop; deterministic given the config seed.

    Raises:
        RuntimeError: divergence guard, if the mean absolute deviation of
            the importance ratio from 1 exceeds 10 in any update.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    params = init_params(config.policy, config.seed)
    optimizer = Adam(params)
    states = []
    for _ in range(config.actors):
        inst = sampler(rng)
        states.append(
            reset(inst, alpha=config.alpha, beta=config.beta, reward_scale=_reward_scale(inst, config))
        )

    curve: list[dict] = []
    all_stats: list[EpisodeStat] = []
    partials = [0.0] * config.actors
    steps_done = 0
    update = 0
    last_row = {"mean_return": 0.0, "mean_twt": 0.0, "mean_tst": 0.0}
    while steps_done < config.total_steps:
        lr = config.learn_rate * max(0.0, 1.0 - steps_done / config.total_steps)
        buffer, states, stats, bootstraps = collect_rollout(
            states, sampler, params, config, rng, partial_rewards=partials
        )
        steps_done += len(buffer)
        adv, ret = _advantages_for_buffer(buffer, bootstraps, config)
        adv = (adv - adv.mean()) / max(float(adv.std()), 1e-8)
        order_base = np.arange(len(buffer))
        worst_dev = 0.0
        for _ in range(config.epochs):
            order = rng.permutation(order_base)
            for lo in range(0, len(order), config.minibatch):
                idx = order[lo : lo + config.minibatch]
                mb = Minibatch(
                    snapshots=[buffer.snapshots[i] for i in idx],
                    actions=np.array([buffer.actions[i] for i in idx]),
                    old_logp=np.array([buffer.logp[i] for i in idx]),
                    advantages=adv[idx],
                    returns=ret[idx],
                )
                _, grads, diag = ppo_loss(
                    mb, params, config.policy, config.clip, config.value_coef, config.entropy_coef
                )
                worst_dev = max(worst_dev, diag["mean_abs_ratio_dev"])
                optimizer.step(grads, lr)
        if worst_dev > 10.0:
            raise RuntimeError(f"policy update diverged: mean |ratio - 1| = {worst_dev:.2f} > 10")
        update += 1
        if stats:
            last_row = {
                "mean_return": float(np.mean([s.total_reward for s in stats])),
                "mean_twt": float(np.mean([s.twt for s in stats])),
                "mean_tst": float(np.mean([s.tst for s in stats])),
            }
        all_stats.extend(stats)
        row = {"update": update, "steps": steps_done, "lr": lr, **last_row}
        curve.append(row)
        if log is not None:
            log(
                f"update {update}: steps={steps_done} return={row['mean_return']:.2f} "
                f"twt={row['mean_twt']:.1f} tst={row['mean_tst']:.1f} lr={lr:.2e}"
            )
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, params, config.policy)
    if curve_path is not None:
        write_curve(curve_path, curve)
    return TrainResult(params=params, config=config, curve=curve, episodes=all_stats)


# ---------------------------------------------------------------------------
# Greedy evaluation
# ---------------------------------------------------------------------------


def greedy_episode(
    inst: ProblemInstance,
    params: dict,
    cfg: PolicyConfig,
    alpha: float = 1.0,
    beta: float = 1.0,
) -> tuple[EnvState, list[Snapshot]]:
    """Roll one episode with argmax action selection (deterministic)."""
    state = reset(inst, alpha=alpha, beta=beta)
    snapshots: list[Snapshot] = []
    budget = 3 * inst.n + 8
    with ad.no_grad():
        while not state.done:
            if len(snapshots) >= budget:
                raise RuntimeError("greedy policy exceeded the step budget")
            snap = Snapshot.from_state(state)
            out = policy_value(batch_snapshots([snap]), params, cfg)
            choice = int(np.argmax(np.where(out.mask[0], out.logits.data[0], -np.inf)))
            snapshots.append(snap)
            state = _apply_action_index(state, snap, choice).state
    return state, snapshots


@dataclass
class EvalRow:
    objectives: ObjectiveValues
    scalarized: float
    wall_s: float


def evaluate_policy(
    params: dict,
    cfg: PolicyConfig,
    instances: Sequence[ProblemInstance],
    alpha: float = 1.0,
    beta: float = 1.0,
) -> tuple[list[EvalRow], float]:
    """Greedy evaluation on a set of instances.

    Every realized schedule is validated; returns per-instance objective
    values with wall time plus the mean inference time.
    """
    rows: list[EvalRow] = []
    for inst in instances:
        t0 = time.perf_counter()
        final, _ = greedy_episode(inst, params, cfg, alpha=alpha, beta=beta)
        wall = time.perf_counter() - t0
        obj = compute_objectives(inst, schedule_from_state(final))
        rows.append(EvalRow(objectives=obj, scalarized=obj.scalarized(alpha, beta), wall_s=wall))
    mean_wall = float(np.mean([r.wall_s for r in rows])) if rows else 0.0
    return rows, mean_wall
