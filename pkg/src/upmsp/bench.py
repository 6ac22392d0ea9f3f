"""Benchmark harness: run solvers over instance suites, aggregate the
two objectives and timing, test significance, and report dominance.

Stochastic methods (the GA and the random policy) honor ``runs``: each
run gets a derived seed and its own result row; aggregation first
averages runs within an instance, then instances, so balanced designs
match the plain row mean.  Every schedule is re-validated before it is
counted (defense in depth; the CLI exit code reflects it).
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .problem import ProblemInstance, read_instance, scalarize, validate_schedule
from .solvers import AtcsrRule, ExactSolver, GeneticAlgorithm, PolicyAgent, RandomPolicy

METHODS = ("atcsr", "ga", "ppo", "exact", "random")
RESULT_FIELDS = ("instance", "method", "run", "seed", "twt", "tst", "scalarized", "wall_ms")
STOCHASTIC = {"ga", "random"}


# ---------------------------------------------------------------------------
# Student t distribution (two-sided p via the regularized incomplete beta,
# evaluated with a Lentz continued fraction; absolute error < 1e-8)
# ---------------------------------------------------------------------------


def _betacf(a: float, b: float, x: float) -> float:
    max_iter = 300
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-12:
            return h
    raise RuntimeError("incomplete beta continued fraction did not converge")


def betainc_regularized(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_two_sided_p(t: float, df: float) -> float:
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if math.isinf(t):
        return 0.0
    return betainc_regularized(df / 2.0, 0.5, df / (df + t * t))


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Paired t statistic and two-sided p value on the differences a - b.

    Zero-variance nonzero-mean differences return the documented sentinel
    ``(+-inf, 0.0)``.

    Raises:
        ValueError: on mismatched lengths, fewer than 2 pairs, or all-zero
            differences (the statistic is undefined).
    """
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("paired samples must have equal lengths")
    n = len(x)
    if n < 2:
        raise ValueError("paired t-test needs at least 2 pairs")
    d = x - y
    if np.all(d == 0):
        raise ValueError("all differences are zero; the t statistic is undefined")
    sd = float(d.std(ddof=1))
    mean = float(d.mean())
    if sd == 0.0:
        return (math.inf if mean > 0 else -math.inf), 0.0
    t = mean / (sd / math.sqrt(n))
    return t, student_t_two_sided_p(t, n - 1)


# ---------------------------------------------------------------------------
# Benchmark runner
# ---------------------------------------------------------------------------


@dataclass
class BenchResult:
    rows: list[dict]
    aggregates: dict[str, dict]
    all_valid: bool
    invalid: list[str] = field(default_factory=list)

    def per_instance(self, method: str, key: str = "scalarized") -> list[float]:
        """Per-instance values (runs averaged), ordered by instance name."""
        grouped: dict[str, list[float]] = {}
        for row in self.rows:
            if row["method"] == method:
                grouped.setdefault(row["instance"], []).append(row[key])
        return [float(np.mean(grouped[name])) for name in sorted(grouped)]


def load_suite(manifest_path: str | Path) -> list[tuple[str, ProblemInstance]]:
    manifest_path = Path(manifest_path)
    entries = json.loads(manifest_path.read_text())
    out = []
    for entry in entries:
        path = manifest_path.parent / entry["file"]
        out.append((entry["file"], read_instance(path)))
    return out


def _make_solver(method: str, alpha: float, beta: float, seed: int, options: dict):
    if method == "atcsr":
        return AtcsrRule(alpha=alpha, beta=beta, **options.get("atcsr", {}))
    if method == "ga":
        return GeneticAlgorithm(alpha=alpha, beta=beta, seed=seed, **options.get("ga", {}))
    if method == "exact":
        return ExactSolver(alpha=alpha, beta=beta)
    if method == "random":
        return RandomPolicy(alpha=alpha, beta=beta, seed=seed)
    if method == "ppo":
        checkpoint = options.get("checkpoint")
        if not checkpoint:
            raise ValueError("method 'ppo' requires a trained checkpoint")
        return PolicyAgent(checkpoint=checkpoint, alpha=alpha, beta=beta)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def run_benchmark(
    suite: Sequence[tuple[str, ProblemInstance]],
    methods: Sequence[str],
    alpha: float = 1.0,
    beta: float = 1.0,
    runs: int = 1,
    seed: int = 0,
    options: dict | None = None,
) -> BenchResult:
    """Solve every instance with every method and aggregate per method."""
    options = options or {}
    rows: list[dict] = []
    invalid: list[str] = []
    for method in methods:
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    for name, inst in suite:
        for method in methods:
            n_runs = runs if method in STOCHASTIC else 1
            for run_idx in range(n_runs):
                run_seed = seed + 1009 * run_idx
                solver = _make_solver(method, alpha, beta, run_seed, options)
                result = solver.solve(inst)
                problems = validate_schedule(inst, result.schedule)
                if problems:
                    invalid.append(f"{method} on {name}: {problems[0]}")
                rows.append(
                    {
                        "instance": name,
                        "method": method,
                        "run": run_idx,
                        "seed": run_seed,
                        "twt": result.objectives.twt,
                        "tst": result.objectives.tst,
                        "scalarized": scalarize(result.objectives, alpha, beta),
                        "wall_ms": result.wall_s * 1000.0,
                    }
                )
    aggregates = aggregate_rows(rows)
    return BenchResult(rows=rows, aggregates=aggregates, all_valid=not invalid, invalid=invalid)


def aggregate_rows(rows: list[dict]) -> dict[str, dict]:
    """Per-method Table-style aggregates: avg twt, avg tst, avg time."""
    per_method: dict[str, dict[str, list[float]]] = {}
    for row in rows:
        bucket = per_method.setdefault(row["method"], {})
        bucket.setdefault(row["instance"], []).append(
            (row["twt"], row["tst"], row["scalarized"], row["wall_ms"])
        )
    out = {}
    for method, per_inst in per_method.items():
        inst_means = [np.mean(vals, axis=0) for vals in per_inst.values()]
        stacked = np.stack(inst_means)
        out[method] = {
            "avg_twt": float(stacked[:, 0].mean()),
            "avg_tst": float(stacked[:, 1].mean()),
            "avg_scalarized": float(stacked[:, 2].mean()),
            "avg_wall_ms": float(stacked[:, 3].mean()),
            "instances": len(per_inst),
        }
    return out


def pareto_report(aggregates: dict[str, dict]) -> tuple[list[dict], list[str]]:
    """Per-method (avg tst, avg twt) points plus dominance verdicts.

    ``X dominates Y`` iff X is no worse on both averaged objectives and
    strictly better on at least one; the emitted relation is irreflexive
    and antisymmetric by construction.
    """
    points = [
        {"method": method, "avg_tst": agg["avg_tst"], "avg_twt": agg["avg_twt"]}
        for method, agg in sorted(aggregates.items())
    ]
    verdicts = []
    dominated_by: dict[str, list[str]] = {p["method"]: [] for p in points}
    for x in points:
        for y in points:
            if x["method"] == y["method"]:
                continue
            no_worse = x["avg_tst"] <= y["avg_tst"] and x["avg_twt"] <= y["avg_twt"]
            strictly = x["avg_tst"] < y["avg_tst"] or x["avg_twt"] < y["avg_twt"]
            if no_worse and strictly:
                verdicts.append(f"{x['method']} dominates {y['method']}")
                dominated_by[x["method"]].append(y["method"])
    for p in points:
        p["dominates"] = ";".join(dominated_by[p["method"]])
    return points, verdicts


# ---------------------------------------------------------------------------
# CSV plumbing
# ---------------------------------------------------------------------------


def write_results_csv(path: str | Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in RESULT_FIELDS})


def read_results_csv(path: str | Path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append(
                {
                    "instance": row["instance"],
                    "method": row["method"],
                    "run": int(row["run"]),
                    "seed": int(row["seed"]),
                    "twt": float(row["twt"]),
                    "tst": float(row["tst"]),
                    "scalarized": float(row["scalarized"]),
                    "wall_ms": float(row["wall_ms"]),
                }
            )
    return rows


def write_pareto_csv(path: str | Path, points: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=("method", "avg_tst", "avg_twt", "dominates"))
        writer.writeheader()
        for p in points:
            writer.writerow(p)
