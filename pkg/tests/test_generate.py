import json
import math

import numpy as np
import pytest

from upmsp.generate import GenParams, derive_seed, due_date_bounds, generate_instance, generate_suite
from upmsp.problem import instance_to_json, validate_instance


class TestDueDateBounds:
    def test_paper_arithmetic_case(self):
        assert due_date_bounds(10, 20, 0.4, 0.2) == (20, 24)

    def test_degenerate_window(self):
        assert due_date_bounds(7, 12, 0.0, 0.0) == (19, 19)

    def test_negative_lower_bound_clamps_to_zero(self):
        assert due_date_bounds(0, 10, 0.6, 1.0) == (0, 9)

    def test_nonpositive_mean_processing_rejected(self):
        with pytest.raises(ValueError):
            due_date_bounds(0, 0, 0.4, 0.6)


class TestGenerateInstance:
    def test_processing_times_within_du_bounds(self):
        inst = generate_instance(GenParams(n=30, m=5, seed=11))
        assert inst.processing.min() >= 1
        assert inst.processing.max() <= 100

    def test_eligibility_cardinality_is_ceil_delta_m(self):
        inst = generate_instance(GenParams(n=20, m=10, elig_delta=0.75, seed=5))
        assert all(len(e) == math.ceil(0.75 * 10) == 8 for e in inst.eligible)

    def test_zero_arrival_intensity_means_zero_releases(self):
        inst = generate_instance(GenParams(n=10, m=3, lam=0.0, seed=2))
        assert inst.release.tolist() == [0] * 10

    def test_self_setups_are_zero(self):
        inst = generate_instance(GenParams(n=8, m=2, seed=3))
        for j in range(8):
            assert inst.setup[j + 1, j, :].tolist() == [0, 0]

    def test_generated_instances_validate(self):
        for seed in range(5):
            inst = generate_instance(GenParams(n=6, m=3, elig_delta=0.75, seed=seed))
            assert validate_instance(inst) == []

    def test_determinism_bit_for_bit(self):
        params = GenParams(n=12, m=4, seed=99)
        assert instance_to_json(generate_instance(params)) == instance_to_json(generate_instance(params))

    def test_due_dates_within_per_job_window(self):
        inst = generate_instance(GenParams(n=40, m=4, tau=0.6, range_r=1.0, seed=17))
        for j in range(inst.n):
            p_bar_j = inst.processing[j, list(inst.eligible[j])].mean()
            # independent re-derivation of the window arithmetic
            lo = math.floor(inst.release[j] + p_bar_j * (1 - 0.6 - 0.5) + 0.5)
            hi = math.floor(inst.release[j] + p_bar_j * (1 - 0.6 + 0.5) + 0.5)
            lo, hi = min(lo, hi), max(lo, hi)
            assert max(lo, 0) <= inst.due[j] <= max(hi, 0)


class TestGenerateSuite:
    def test_fifty_replicates_distinct_seeds(self, tmp_path):
        manifest = generate_suite([GenParams(n=4, m=2, seed=1)], 50, tmp_path)
        assert len(manifest) == 50
        seeds = {entry["seed"] for entry in manifest}
        assert len(seeds) == 50
        assert (tmp_path / "manifest.json").exists()

    def test_same_base_seed_byte_identical(self, tmp_path):
        a_dir, b_dir = tmp_path / "a", tmp_path / "b"
        generate_suite([GenParams(n=4, m=2, seed=7)], 3, a_dir)
        generate_suite([GenParams(n=4, m=2, seed=7)], 3, b_dir)
        for f in sorted(a_dir.iterdir()):
            assert f.read_bytes() == (b_dir / f.name).read_bytes()

    def test_zero_cells_empty_manifest(self, tmp_path):
        manifest = generate_suite([], 5, tmp_path)
        assert manifest == []
        assert json.loads((tmp_path / "manifest.json").read_text()) == []

    def test_zero_replicates_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            generate_suite([GenParams(n=2, m=1, seed=0)], 0, tmp_path)

    def test_derive_seed_is_stable(self):
        assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
        assert derive_seed(1, 2, 3) != derive_seed(1, 2, 4)


class TestSampledStatistics:
    def test_small_scale_field_bounds(self):
        # full 1e4-sample version lives in the acceptance suite
        insts = [generate_instance(GenParams(n=20, m=5, seed=s)) for s in range(10)]
        p = np.concatenate([i.processing.ravel() for i in insts])
        w = np.concatenate([i.weight for i in insts])
        r = np.concatenate([i.release for i in insts])
        assert p.min() >= 1 and p.max() <= 100
        assert w.min() >= 1 and w.max() <= 10
        assert r.min() >= 0
        for inst in insts:
            cap = math.floor(0.5 * inst.processing.mean() + 0.5)
            assert inst.release.max() <= cap
            scap = math.floor(0.25 * inst.processing.mean() + 0.5)
            assert inst.setup.max() <= scap
