import csv
import json

import pytest

from semimatch import write_instance
from semimatch.cli import main
from conftest import random_unit, random_weighted


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def unit_file(tmp_path):
    path = tmp_path / "unit.json"
    write_instance(random_unit(1, nc=8, ns=4, p=0.5), path)
    return str(path)


@pytest.fixture
def weighted_file(tmp_path):
    path = tmp_path / "weighted.json"
    write_instance(random_weighted(1, normalized=False), path)
    return str(path)


class TestGen:
    def test_gen_writes_instance(self, tmp_path, capsys):
        out = tmp_path / "star.json"
        code, stdout, _ = run_cli(capsys, "gen", "star", "--clients", "6", "-o", str(out))
        assert code == 0
        summary = json.loads(stdout)
        assert set(summary) == {"digest", "n", "m"}
        assert summary["n"] == 7
        assert json.loads(out.read_text())["edges"]

    def test_gen_deterministic_bytes(self, tmp_path, capsys):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run_cli(capsys, "gen", "random-bipartite", "--clients", "20", "--servers", "5",
                "--p", "0.4", "--seed", "9", "-o", str(a))
        run_cli(capsys, "gen", "random-bipartite", "--clients", "20", "--servers", "5",
                "--p", "0.4", "--seed", "9", "-o", str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_unwritable_output_is_error(self, tmp_path, capsys):
        code, _, err = run_cli(capsys, "gen", "star", "--clients", "4",
                               "-o", str(tmp_path / "no" / "such" / "dir" / "x.json"))
        assert code == 1
        assert json.loads(err)["error"]


class TestSolveExitCodes:
    def test_success(self, unit_file, capsys):
        code, stdout, _ = run_cli(capsys, "solve", unit_file, "--algo", "seq")
        assert code == 0
        report = json.loads(stdout)
        assert report["algorithm"] == "seq"
        assert set(report["norms"]) == {"1", "2", "3", "inf"}
        assert len(report["assignment"]) == 8

    def test_missing_file_is_error(self, capsys):
        code, _, err = run_cli(capsys, "solve", "/nonexistent.json", "--algo", "seq")
        assert code == 1
        assert json.loads(err)["error"]

    def test_infeasible_exit_2(self, tmp_path, capsys):
        path = tmp_path / "iso.json"
        path.write_text(
            '{"clients":[{"id":0,"weight":1},{"id":1,"weight":1}],'
            '"servers":[{"id":2}],"edges":[[0,2]]}'
        )
        code, _, err = run_cli(capsys, "solve", str(path), "--algo", "seq")
        assert code == 2
        assert json.loads(err)["error"] == "infeasible"
        assert json.loads(err)["client"] == 1

    def test_unweighted_algo_rejects_weights(self, weighted_file, capsys):
        code, _, err = run_cli(capsys, "solve", weighted_file, "--algo", "congest-unweighted")
        assert code == 1
        assert "unit weights" in json.loads(err)["detail"]

    def test_backup_requires_r(self, unit_file, capsys):
        code, _, err = run_cli(capsys, "solve", unit_file, "--algo", "backup")
        assert code == 1


class TestSolveReports:
    def test_auto_normalization_flagged(self, weighted_file, capsys):
        code, stdout, _ = run_cli(capsys, "solve", weighted_file, "--algo", "seq")
        assert code == 0
        assert json.loads(stdout)["normalized"] is True

    def test_oracle_ratios(self, unit_file, capsys):
        code, stdout, _ = run_cli(capsys, "solve", unit_file, "--algo", "congest-unweighted",
                                  "--oracle")
        assert code == 0
        oracle = json.loads(stdout)["oracle"]
        assert oracle["ratios"]["inf"] >= 1.0
        assert oracle["ratios"]["inf"] <= 8.0

    def test_extra_norm(self, unit_file, capsys):
        _, stdout, _ = run_cli(capsys, "solve", unit_file, "--algo", "seq", "--p", "4")
        assert "4.0" in json.loads(stdout)["norms"]

    def test_deterministic_report(self, unit_file, capsys):
        _, out1, _ = run_cli(capsys, "solve", unit_file, "--algo", "seq")
        _, out2, _ = run_cli(capsys, "solve", unit_file, "--algo", "seq")
        r1, r2 = json.loads(out1), json.loads(out2)
        r1.pop("wall_time_s"), r2.pop("wall_time_s")
        assert r1 == r2

    def test_simulate_trace(self, unit_file, tmp_path, capsys):
        trace_path = tmp_path / "trace.json"
        code, stdout, _ = run_cli(capsys, "solve", unit_file, "--algo", "congest-unweighted",
                                  "--simulate", "--trace-out", str(trace_path))
        assert code == 0
        report = json.loads(stdout)
        doc = json.loads(trace_path.read_text())
        assert report["charged_rounds"] == doc["chargedRounds"]

    def test_simulate_seq_rejected(self, unit_file, capsys):
        code, _, err = run_cli(capsys, "solve", unit_file, "--algo", "seq", "--simulate")
        assert code == 1

    def test_backup_report(self, tmp_path, capsys):
        path = tmp_path / "sq.json"
        path.write_text(
            '{"clients":[{"id":0,"weight":1},{"id":1,"weight":1}],'
            '"servers":[{"id":2},{"id":3}],'
            '"edges":[[0,2],[0,3],[1,2],[1,3]]}'
        )
        code, stdout, _ = run_cli(capsys, "solve", str(path), "--algo", "backup", "--r", "2",
                                  "--oracle")
        assert code == 0
        report = json.loads(stdout)
        assert report["assignment"] == {"0": [2, 3], "1": [2, 3]}
        assert report["oracle"]["ratio_linf"] <= 8.0


class TestVerify:
    def test_validity_pass_and_fail(self, unit_file, tmp_path, capsys):
        code, stdout, _ = run_cli(capsys, "solve", unit_file, "--algo", "seq")
        report = json.loads(stdout)
        artifact = tmp_path / "a.json"
        artifact.write_text(json.dumps({"assignment": report["assignment"]}))
        code, stdout, _ = run_cli(capsys, "verify", unit_file, str(artifact),
                                  "--check", "validity")
        assert code == 0
        assert json.loads(stdout)["pass"] is True
        # corrupt: assign a client to a non-adjacent server id that exists
        bad = dict(report["assignment"])
        inst_doc = json.loads(open(unit_file).read())
        servers = [s["id"] for s in inst_doc["servers"]]
        c0 = next(iter(bad))
        adj = [e[1] for e in inst_doc["edges"] if str(e[0]) == c0]
        non_adj = [s for s in servers if s not in adj]
        if non_adj:
            bad[c0] = non_adj[0]
            artifact.write_text(json.dumps({"assignment": bad}))
            code, stdout, _ = run_cli(capsys, "verify", unit_file, str(artifact),
                                      "--check", "validity")
            assert code == 1

    def test_no_short_aug_paths_check(self, unit_file, tmp_path, capsys):
        dump_dir = tmp_path / "dumps"
        run_cli(capsys, "solve", unit_file, "--algo", "congest-unweighted",
                "--dump-matchings", str(dump_dir))
        artifact = dump_dir / "B1.json"
        assert artifact.exists()
        code, stdout, _ = run_cli(capsys, "verify", unit_file, str(artifact),
                                  "--check", "no-short-aug-paths:17")
        assert code == 0
        assert json.loads(stdout)["checks"][0]["pass"] is True

    def test_expansion_check(self, unit_file, tmp_path, capsys):
        dump_dir = tmp_path / "dumps"
        run_cli(capsys, "solve", unit_file, "--algo", "congest-unweighted",
                "--dump-matchings", str(dump_dir))
        # the largest budget's matching is client-perfect, so the check is
        # immediate regardless of alpha
        budgets = sorted(int(p.stem[1:]) for p in dump_dir.glob("B*.json"))
        artifact = dump_dir / f"B{budgets[-1]}.json"
        code, stdout, _ = run_cli(capsys, "verify", unit_file, str(artifact),
                                  "--check", "expansion:2")
        assert code == 0

    def test_budget_check(self, unit_file, tmp_path, capsys):
        trace_path = tmp_path / "trace.json"
        run_cli(capsys, "solve", unit_file, "--algo", "congest-unweighted",
                "--simulate", "--trace-out", str(trace_path))
        code, stdout, _ = run_cli(capsys, "verify", unit_file, str(trace_path),
                                  "--check", "budget")
        assert code == 0
        assert json.loads(stdout)["checks"][0]["pass"] is True

    def test_cost_reducing_check(self, tmp_path, capsys):
        path = tmp_path / "pair.json"
        path.write_text(
            '{"clients":[{"id":0,"weight":1},{"id":1,"weight":1}],'
            '"servers":[{"id":2},{"id":3}],'
            '"edges":[[0,2],[0,3],[1,2]]}'
        )
        artifact = tmp_path / "a.json"
        artifact.write_text(json.dumps({"assignment": {"0": 2, "1": 2}}))
        code, stdout, _ = run_cli(capsys, "verify", str(path), str(artifact),
                                  "--check", "cost-reducing")
        assert code == 1
        entry = json.loads(stdout)["checks"][0]
        assert entry["pass"] is False
        assert entry["witness"] == [2, 0, 3]

    def test_unknown_check(self, unit_file, tmp_path, capsys):
        artifact = tmp_path / "a.json"
        artifact.write_text("{}")
        code, _, err = run_cli(capsys, "verify", unit_file, str(artifact),
                               "--check", "bogus")
        assert code == 1

    def test_missing_artifact_data(self, unit_file, tmp_path, capsys):
        artifact = tmp_path / "a.json"
        artifact.write_text("{}")
        code, _, err = run_cli(capsys, "verify", unit_file, str(artifact),
                               "--check", "validity")
        assert code == 1
        assert "artifact" in json.loads(err)["detail"]


class TestBench:
    def test_doubling_csv(self, tmp_path, capsys):
        out = tmp_path / "bench.csv"
        code, stdout, _ = run_cli(capsys, "bench", "--doubling", "4", "6", "-o", str(out))
        assert code == 0
        with open(out) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["n", "m", "algo", "time_ns", "linf", "ratio", "charged_rounds"]
        assert len(rows) == 4
        assert [int(r[0]) for r in rows[1:]] == [16, 32, 64]

    def test_suite_file(self, tmp_path, capsys):
        suite = [
            {"generator": "star", "params": {"n_clients": 5}, "algo": "congest-unweighted",
             "oracle": True},
            {"generator": "random-bipartite",
             "params": {"n_clients": 8, "n_servers": 4, "p": 0.5}, "seed": 3,
             "algo": "congest-unweighted", "simulate": True},
        ]
        suite_path = tmp_path / "suite.json"
        suite_path.write_text(json.dumps(suite))
        out = tmp_path / "bench.csv"
        code, _, _ = run_cli(capsys, "bench", "--suite", str(suite_path), "-o", str(out))
        assert code == 0
        with open(out) as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 3
        assert float(rows[1][5]) == 1.0  # star solve is exactly optimal
        assert rows[2][6] != ""  # simulated entry records charged rounds
