import json

import pytest

from upmsp.cli import main
from upmsp.generate import GenParams, generate_suite
from upmsp.problem import read_instance, schedule_from_dict, validate_schedule


@pytest.fixture
def tiny_suite(tmp_path):
    out = tmp_path / "suite"
    generate_suite([GenParams(n=4, m=2, seed=5)], 2, out)
    return out


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestGen:
    def test_gen_writes_suite_and_manifest(self, tmp_path, capsys):
        out = tmp_path / "cells"
        code, stdout, _ = run_cli(capsys, "gen", "--n", "3", "--m", "2", "--count", "4",
                                  "--seed", "9", "--out-dir", str(out))
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest) == 4
        inst = read_instance(out / manifest[0]["file"])
        assert inst.n == 3
        assert stdout.strip().endswith("manifest.json")

    def test_gen_byte_identical_across_runs(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        run_cli(capsys, "gen", "--n", "3", "--m", "2", "--count", "2", "--seed", "1",
                "--out-dir", str(a))
        run_cli(capsys, "gen", "--n", "3", "--m", "2", "--count", "2", "--seed", "1",
                "--out-dir", str(b))
        for f in sorted(a.iterdir()):
            assert f.read_bytes() == (b / f.name).read_bytes()


class TestSolve:
    @pytest.mark.parametrize("method,extra", [
        ("atcsr", ()),
        ("exact", ()),
        ("random", ("--seed", "3")),
        ("ga", ("--budget-ms", "50", "--seed", "3")),
    ])
    def test_solve_outputs_valid_schedule(self, tiny_suite, capsys, method, extra):
        inst_path = next(p for p in sorted(tiny_suite.iterdir()) if p.name != "manifest.json")
        code, stdout, _ = run_cli(capsys, "solve", "--instance", str(inst_path),
                                  "--method", method, *extra)
        assert code == 0
        payload = json.loads(stdout)
        inst = read_instance(inst_path)
        sched = schedule_from_dict(payload["schedule"])
        assert validate_schedule(inst, sched) == []
        assert payload["scalarized"] == payload["twt"] + payload["tst"]

    def test_solve_stdout_deterministic(self, tiny_suite, capsys):
        inst_path = next(p for p in sorted(tiny_suite.iterdir()) if p.name != "manifest.json")
        outs = []
        for _ in range(2):
            code, stdout, _ = run_cli(capsys, "solve", "--instance", str(inst_path),
                                      "--method", "atcsr")
            assert code == 0
            outs.append(stdout)
        assert outs[0] == outs[1]

    def test_exact_pareto_csv(self, tiny_suite, tmp_path, capsys):
        inst_path = next(p for p in sorted(tiny_suite.iterdir()) if p.name != "manifest.json")
        pareto = tmp_path / "front.csv"
        code, _, _ = run_cli(capsys, "solve", "--instance", str(inst_path),
                             "--method", "exact", "--pareto-out", str(pareto))
        assert code == 0
        lines = pareto.read_text().splitlines()
        assert lines[0] == "twt,tst"
        assert len(lines) >= 2

    def test_trace_and_snapshot_export(self, tiny_suite, tmp_path, capsys):
        inst_path = next(p for p in sorted(tiny_suite.iterdir()) if p.name != "manifest.json")
        trace = tmp_path / "trace.jsonl"
        snaps = tmp_path / "snaps.jsonl"
        code, _, _ = run_cli(capsys, "solve", "--instance", str(inst_path),
                             "--method", "atcsr", "--trace-out", str(trace),
                             "--snapshots-out", str(snaps))
        assert code == 0
        records = [json.loads(line) for line in trace.read_text().splitlines()]
        assert all(set(r) == {"t", "action", "reward", "now"} for r in records)
        snapshots = [json.loads(line) for line in snaps.read_text().splitlines()]
        assert len(snapshots) == len(records)
        assert all(s["v"] == 1 for s in snapshots)

    def test_trace_rejected_for_ga(self, tiny_suite, tmp_path, capsys):
        inst_path = next(p for p in sorted(tiny_suite.iterdir()) if p.name != "manifest.json")
        code, _, err = run_cli(capsys, "solve", "--instance", str(inst_path),
                               "--method", "ga", "--budget-ms", "20",
                               "--trace-out", str(tmp_path / "t.jsonl"))
        assert code == 2

    def test_ppo_requires_checkpoint(self, tiny_suite, capsys):
        inst_path = next(p for p in sorted(tiny_suite.iterdir()) if p.name != "manifest.json")
        code, _, err = run_cli(capsys, "solve", "--instance", str(inst_path), "--method", "ppo")
        assert code == 2
        assert "checkpoint" in err


class TestTrainCli:
    def test_micro_training_run(self, tmp_path, capsys):
        ckpt = tmp_path / "policy.json"
        code, _, err = run_cli(
            capsys, "train", "--n", "3", "--m", "2", "--steps", "64",
            "--actors", "2", "--rollout-steps", "32", "--minibatch", "16",
            "--hidden", "8", "--rounds", "1", "--head-hidden", "8",
            "--seed", "4", "--out", str(ckpt),
        )
        assert code == 0
        assert ckpt.exists()
        curve = (tmp_path / "policy.json.curve.csv").read_text().splitlines()
        assert curve[0] == "update,steps,mean_return,mean_twt,mean_tst,lr"
        assert len(curve) >= 2

    def test_solve_with_trained_checkpoint(self, tiny_suite, tmp_path, capsys):
        ckpt = tmp_path / "policy.json"
        run_cli(capsys, "train", "--n", "4", "--m", "2", "--steps", "32",
                "--actors", "2", "--rollout-steps", "16", "--minibatch", "8",
                "--hidden", "8", "--rounds", "1", "--head-hidden", "8",
                "--seed", "4", "--out", str(ckpt))
        inst_path = next(p for p in sorted(tiny_suite.iterdir()) if p.name != "manifest.json")
        code, stdout, _ = run_cli(capsys, "solve", "--instance", str(inst_path),
                                  "--method", "ppo", "--checkpoint", str(ckpt))
        assert code == 0
        payload = json.loads(stdout)
        inst = read_instance(inst_path)
        assert validate_schedule(inst, schedule_from_dict(payload["schedule"])) == []


class TestBenchAndPareto:
    def test_bench_then_pareto(self, tiny_suite, tmp_path, capsys):
        results = tmp_path / "results.csv"
        code, _, err = run_cli(capsys, "bench", "--suite", str(tiny_suite / "manifest.json"),
                               "--methods", "atcsr,exact,random", "--runs", "2",
                               "--out", str(results))
        assert code == 0
        lines = results.read_text().splitlines()
        assert lines[0] == "instance,method,run,seed,twt,tst,scalarized,wall_ms"
        # 2 instances x (atcsr 1 + exact 1 + random 2 runs)
        assert len(lines) - 1 == 2 * 4

        pareto = tmp_path / "pareto.csv"
        code, stdout, _ = run_cli(capsys, "pareto", "--in", str(results), "--out", str(pareto))
        assert code == 0
        header = pareto.read_text().splitlines()[0]
        assert header == "method,avg_tst,avg_twt,dominates"
        # exact dominates or ties every method; at minimum the file lists all three
        assert len(pareto.read_text().splitlines()) == 4
