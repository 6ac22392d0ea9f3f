"""Random instance generation over the standard parameter grid.

All sampling uses numpy's Philox counter-based generator so that a given
parameter set (including the seed) reproduces an instance bit for bit on
any platform.  Discrete-uniform endpoints derived from real-valued
expressions are rounded half-up before sampling.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .problem import ProblemInstance, instance_to_json

TAU_GRID = (0.2, 0.4, 0.6)
RANGE_GRID = (0.2, 0.6, 1.0)
SETUP_RATIO_GRID = (0.1, 0.25)
ELIG_DENSITY_GRID = (0.75, 1.0)


@dataclass(frozen=True)
class GenParams:
    """Parameters of one generator cell.

    ``tau`` controls due-date tightness, ``range_r`` the due-date window
    width, ``setup_beta`` the setup-to-processing ratio, ``elig_delta``
    the eligibility density and ``lam`` the arrival intensity.
    """

    n: int
    m: int
    tau: float = 0.4
    range_r: float = 0.6
    setup_beta: float = 0.25
    elig_delta: float = 1.0
    lam: float = 0.5
    seed: int = 0

    def validate(self) -> None:
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be >= 1")
        if not 0 < self.elig_delta <= 1:
            raise ValueError("eligibility density must be in (0, 1]")
        if min(self.tau, self.range_r, self.setup_beta, self.lam) < 0:
            raise ValueError("tau, range_r, setup_beta and lam must be non-negative")


def round_half_up(x: float) -> int:
    """Round to the nearest integer, halves toward +inf."""
    return int(math.floor(x + 0.5))


def due_date_bounds(r_j: int, p_bar_j: float, tau: float, range_r: float) -> tuple[int, int]:
    """Window ``[lo, hi]`` the due date of one job is drawn from.

    ``lo = round(r_j + p_bar_j * (1 - tau - range_r/2))`` and ``hi`` uses
    ``+ range_r/2``; the endpoints are swapped if rounding inverted them
    and clamped below at 0 (a job may be tardy from the start).
    """
    if p_bar_j <= 0:
        raise ValueError("p_bar_j must be positive")
    lo = round_half_up(r_j + p_bar_j * (1.0 - tau - range_r / 2.0))
    hi = round_half_up(r_j + p_bar_j * (1.0 - tau + range_r / 2.0))
    if lo > hi:
        lo, hi = hi, lo
    return max(lo, 0), max(hi, 0)


def _du(rng: np.random.Generator, low: int, high: int, size) -> np.ndarray:
    """Discrete uniform on the closed range [low, high]."""
    return rng.integers(low, high + 1, size=size, dtype=np.int64)


def generate_instance(params: GenParams) -> ProblemInstance:
    """Sample one instance; deterministic given ``params`` (incl. seed).

    Sampling order is fixed: processing, releases, weights, setups,
    eligibility, due dates.  Self-setups ``s[j][j][k]`` are forced to 0.
    """
    params.validate()
    rng = np.random.Generator(np.random.Philox(params.seed))
    n, m = params.n, params.m

    processing = _du(rng, 1, 100, (n, m))
    p_bar = float(processing.mean())
    release = _du(rng, 0, round_half_up(params.lam * p_bar), n)
    weight = _du(rng, 1, 10, n)

    setup = _du(rng, 0, round_half_up(params.setup_beta * p_bar), (n + 1, n, m))
    for j in range(n):
        setup[j + 1, j, :] = 0

    n_elig = math.ceil(params.elig_delta * m)
    eligible = tuple(
        tuple(sorted(rng.choice(m, size=n_elig, replace=False).tolist())) for _ in range(n)
    )

    due = np.zeros(n, dtype=np.int64)
    for j in range(n):
        p_bar_j = float(processing[j, list(eligible[j])].mean())
        lo, hi = due_date_bounds(int(release[j]), p_bar_j, params.tau, params.range_r)
        due[j] = _du(rng, lo, hi, None)

    return ProblemInstance(
        processing=processing,
        release=release,
        due=due,
        weight=weight,
        setup=setup,
        eligible=eligible,
        meta={"params": asdict(params), "seed": params.seed},
    )


def derive_seed(base_seed: int, cell_index: int, replicate: int) -> int:
    """Stable 63-bit seed for one (cell, replicate) slot of a suite."""
    digest = hashlib.sha256(f"{base_seed}:{cell_index}:{replicate}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def generate_suite(
    grid: list[GenParams], instances_per_cell: int, out_dir: str | Path
) -> list[dict]:
    """Write one JSON file per (cell, replicate) plus a manifest.

    Returns the manifest entries: ``{"file", "params", "seed"}`` per
    instance.  Re-running with the same grid and base seeds produces
    byte-identical files.
    """
    if instances_per_cell < 1:
        raise ValueError("instances_per_cell must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest: list[dict] = []
    for ci, cell in enumerate(grid):
        for rep in range(instances_per_cell):
            seed = derive_seed(cell.seed, ci, rep)
            params = GenParams(**{**asdict(cell), "seed": seed})
            inst = generate_instance(params)
            name = f"inst_n{cell.n}_m{cell.m}_c{ci}_r{rep}.json"
            path = out / name
            try:
                path.write_text(instance_to_json(inst))
            except OSError as exc:
                raise OSError(f"failed to write {path}: {exc}") from exc
            manifest.append({"file": name, "params": asdict(params), "seed": seed})
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=1) + "\n")
    return manifest
