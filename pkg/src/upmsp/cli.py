"""Command-line interface.

Subcommands: ``gen`` (instance suites), ``solve`` (one instance, one
method), ``train`` (PPO), ``bench`` (suite x methods), ``pareto``
(dominance report from a results CSV).  Canonical results go to stdout
or ``--out`` files and contain no timing, so repeated runs with the same
seed are byte-identical; progress and wall times go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .env import Assign, rollout
from .generate import GenParams, generate_instance, generate_suite
from .graph import build_graph, write_snapshots
from .nn.model import PolicyConfig
from .ppo import TrainConfig, train
from .problem import read_instance, schedule_to_dict
from .solvers import AtcsrRule, ExactSolver, GeneticAlgorithm, PolicyAgent, RandomPolicy
from .solvers.exact import pareto_enumerate


def _eprint(*args):
    print(*args, file=sys.stderr)


def cmd_gen(args) -> int:
    cell = GenParams(
        n=args.n,
        m=args.m,
        tau=args.tau,
        range_r=args.range,
        setup_beta=args.beta,
        elig_delta=args.delta,
        lam=args.lam,
        seed=args.seed,
    )
    manifest = generate_suite([cell], args.count, args.out_dir)
    _eprint(f"wrote {len(manifest)} instances to {args.out_dir}")
    print(str(Path(args.out_dir) / "manifest.json"))
    return 0


def _env_trace(inst, solver, args):
    """Re-run an env-driven solver as a policy to export trace/snapshots."""
    if isinstance(solver, AtcsrRule):
        policy = solver.dispatch
    elif isinstance(solver, RandomPolicy):
        rng = np.random.default_rng(solver.seed)
        from .env import random_policy

        policy = random_policy(rng)
    else:  # PolicyAgent
        from .nn.batch import Snapshot, batch_snapshots
        from .nn.model import policy_value
        from .nn import autodiff as ad

        def policy(state):
            snap = Snapshot.from_state(state)
            with ad.no_grad():
                out = policy_value(batch_snapshots([snap]), solver.params_, solver.policy_config_)
            choice = int(np.argmax(np.where(out.mask[0], out.logits.data[0], -np.inf)))
            if choice < len(snap.pair_jobs):
                return Assign(
                    int(snap.graph.job_ids[snap.pair_jobs[choice]]),
                    int(snap.pair_machines[choice]),
                )
            from .env import WAIT

            return WAIT

    episode = rollout(inst, policy, alpha=args.alpha, beta=args.beta)
    if args.trace_out:
        with open(args.trace_out, "w") as fh:
            for record in episode.records():
                fh.write(json.dumps(record, separators=(",", ":")) + "\n")
        _eprint(f"trace written to {args.trace_out}")
    if args.snapshots_out:
        count = write_snapshots(args.snapshots_out, (build_graph(s) for s in episode.states))
        _eprint(f"{count} snapshots written to {args.snapshots_out}")


def cmd_solve(args) -> int:
    inst = read_instance(args.instance)
    if args.method == "atcsr":
        solver = AtcsrRule(k1=args.k1, k2=args.k2, k3=args.k3, alpha=args.alpha, beta=args.beta)
    elif args.method == "ga":
        solver = GeneticAlgorithm(
            population=args.pop,
            budget_ms=args.budget_ms,
            max_generations=args.generations,
            alpha_fitness=args.alpha_fitness,
            seed=args.seed,
            alpha=args.alpha,
            beta=args.beta,
        )
    elif args.method == "exact":
        solver = ExactSolver(alpha=args.alpha, beta=args.beta)
    elif args.method == "random":
        solver = RandomPolicy(seed=args.seed, alpha=args.alpha, beta=args.beta)
    elif args.method == "ppo":
        if not args.checkpoint:
            _eprint("error: --checkpoint is required for --method ppo")
            return 2
        solver = PolicyAgent(checkpoint=args.checkpoint, alpha=args.alpha, beta=args.beta)
    else:
        _eprint(f"unknown method {args.method}")
        return 2

    result = solver.solve(inst)
    payload = {
        "method": args.method,
        "alpha": args.alpha,
        "beta": args.beta,
        "twt": result.objectives.twt,
        "tst": result.objectives.tst,
        "scalarized": result.scalarized,
        "schedule": schedule_to_dict(result.schedule),
    }
    if args.method == "exact":
        payload["optimal_value"] = result.info["optimal_value"]
        if args.pareto_out:
            points = pareto_enumerate(inst)
            with open(args.pareto_out, "w") as fh:
                fh.write("twt,tst\n")
                for p in points:
                    fh.write(f"{p.twt},{p.tst}\n")
            _eprint(f"pareto front written to {args.pareto_out}")
    if args.method == "ga":
        payload["generations"] = result.info["generations"]
        payload["fitness"] = result.info["fitness"]
    text = json.dumps(payload, separators=(",", ":"))
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    _eprint(f"{args.method}: twt={result.objectives.twt} tst={result.objectives.tst} "
            f"wall={result.wall_s * 1000:.1f} ms")
    if args.trace_out or args.snapshots_out:
        if args.method in ("atcsr", "random", "ppo"):
            _env_trace(inst, solver, args)
        else:
            _eprint(f"error: --trace-out/--snapshots-out not supported for {args.method}")
            return 2
    return 0


def cmd_train(args) -> int:
    cell = GenParams(
        n=args.n, m=args.m, tau=args.tau, range_r=args.range,
        setup_beta=args.beta_setup, elig_delta=args.delta, seed=args.seed,
    )

    def sampler(rng: np.random.Generator):
        seed = int(rng.integers(2**63 - 1))
        return generate_instance(GenParams(**{**asdict(cell), "seed": seed}))

    config = TrainConfig(
        total_steps=args.steps,
        actors=args.actors,
        rollout_steps=args.rollout_steps,
        minibatch=args.minibatch,
        entropy_coef=args.entropy_coef,
        seed=args.seed,
        alpha=args.alpha,
        beta=args.beta,
        policy=PolicyConfig(hidden=args.hidden, rounds=args.rounds, head_hidden=args.head_hidden),
    )
    curve_path = args.curve_out or (str(args.out) + ".curve.csv")
    train(sampler, config, checkpoint_path=args.out, curve_path=curve_path, log=_eprint)
    _eprint(f"checkpoint written to {args.out}; learning curve to {curve_path}")
    return 0


def cmd_bench(args) -> int:
    suite = bench_mod.load_suite(args.suite)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    options = {
        "checkpoint": args.checkpoint,
        "ga": {"budget_ms": args.ga_budget_ms},
    }
    result = bench_mod.run_benchmark(
        suite, methods, alpha=args.alpha, beta=args.beta, runs=args.runs,
        seed=args.seed, options=options,
    )
    bench_mod.write_results_csv(args.out, result.rows)
    _eprint(f"{len(result.rows)} rows written to {args.out}")
    for method, agg in sorted(result.aggregates.items()):
        _eprint(
            f"{method:8s} avg_twt={agg['avg_twt']:10.2f} avg_tst={agg['avg_tst']:9.2f} "
            f"avg_time={agg['avg_wall_ms']:9.2f} ms over {agg['instances']} instances"
        )
    if not result.all_valid:
        for line in result.invalid:
            _eprint(f"INVALID SCHEDULE: {line}")
        return 1
    return 0


def cmd_pareto(args) -> int:
    rows = bench_mod.read_results_csv(args.infile)
    aggregates = bench_mod.aggregate_rows(rows)
    points, verdicts = bench_mod.pareto_report(aggregates)
    bench_mod.write_pareto_csv(args.out, points)
    for verdict in verdicts:
        print(verdict)
    _eprint(f"pareto report written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="upmsp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate an instance suite")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--tau", type=float, default=0.4)
    p.add_argument("--range", type=float, default=0.6)
    p.add_argument("--beta", type=float, default=0.25, help="setup time ratio")
    p.add_argument("--delta", type=float, default=1.0, help="eligibility density")
    p.add_argument("--lam", type=float, default=0.5, help="arrival intensity")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="solve one instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--method", required=True, choices=bench_mod.METHODS)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--k1", type=float, default=2.0)
    p.add_argument("--k2", type=float, default=0.5)
    p.add_argument("--k3", type=float, default=1.0)
    p.add_argument("--pop", type=int, default=60)
    p.add_argument("--budget-ms", type=float, default=1000.0)
    p.add_argument("--generations", type=int, default=None)
    p.add_argument("--alpha-fitness", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--pareto-out", default=None)
    p.add_argument("--trace-out", default=None)
    p.add_argument("--snapshots-out", default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("train", help="train the PPO agent")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--tau", type=float, default=0.4)
    p.add_argument("--range", type=float, default=0.6)
    p.add_argument("--beta-setup", type=float, default=0.25)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=200_000)
    p.add_argument("--actors", type=int, default=8)
    p.add_argument("--rollout-steps", type=int, default=2048)
    p.add_argument("--minibatch", type=int, default=64)
    p.add_argument("--entropy-coef", type=float, default=0.01)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--rounds", type=int, default=2)
    p.add_argument("--head-hidden", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--curve-out", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bench", help="run a benchmark over a suite")
    p.add_argument("--suite", required=True, help="manifest.json path")
    p.add_argument("--methods", required=True, help="comma-separated method list")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--ga-budget-ms", type=float, default=1000.0)
    p.add_argument("--out", default="results.csv")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("pareto", help="dominance report from a results CSV")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", default="pareto.csv")
    p.set_defaults(func=cmd_pareto)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
