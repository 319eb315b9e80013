import json
import subprocess
import sys

import pytest

from sublinear_lab.cli import main
from sublinear_lab.fuzz import FuzzConfig, fuzz
from sublinear_lab.inequality_lab import Tolerances, derive_flags
from tests.conftest import DATA


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestCheck:
    def test_scenario_a(self, capsys):
        code, out, _ = run(capsys, "check", str(DATA / "scenario_a.json"))
        report = json.loads(out)
        assert code == 0
        assert report["passed"]
        assert report["lhs_m2"] == pytest.approx(0.252, abs=1e-14)
        assert report["bound"] == pytest.approx(0.5, abs=1e-14)
        assert report["scenario"] == "scenario-a"
        assert derive_flags(report, Tolerances(**report["tolerances"])) == report["flags"]

    def test_fair_coin(self, capsys):
        code, out, _ = run(capsys, "check", str(DATA / "fair_coin.json"))
        report = json.loads(out)
        assert code == 0
        assert report["lhs_m2"] == pytest.approx(0.5)
        assert report["sigma_bar_sq"] == pytest.approx(1.0)

    def test_out_file_deterministic(self, tmp_path, capsys):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for target in (a, b):
            assert run(capsys, "check", str(DATA / "scenario_b.json"), "--out", str(target))[0] == 0
        assert a.read_bytes() == b.read_bytes()

    def test_failed_check_exit_code(self, capsys):
        code, out, _ = run(capsys, "check", str(DATA / "scenario_a.json"), "--tol", "minimax=-1")
        assert code == 1
        assert json.loads(out)["flags"]["thm34"] is False

    def test_input_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"version": "1", "dimension": 1, "marginals": []}')
        code, out, _ = run(capsys, "check", str(bad))
        assert code == 2
        assert json.loads(out)["error"]["kind"] == "input"

    def test_missing_file(self, tmp_path, capsys):
        assert run(capsys, "check", str(tmp_path / "nope.json"))[0] == 2

    def test_bad_tol(self, capsys):
        assert run(capsys, "check", str(DATA / "scenario_a.json"), "--tol", "bogus=1")[0] == 2

    def test_resource_error(self, capsys):
        code, out, _ = run(capsys, "check", str(DATA / "scenario_a.json"), "--budget", "3")
        assert code == 3
        err = json.loads(out)["error"]
        assert err["kind"] == "resource" and "4" in err["message"]


class TestSweep:
    def test_scenario_a(self, capsys):
        code, out, _ = run(capsys, "sweep", str(DATA / "scenario_a.json"), "--n-max", "2")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "n,lhs,bound,gap"
        rows = [[float(v) for v in line.split(",")] for line in lines[1:]]
        assert rows == [pytest.approx(r, abs=1e-14) for r in ([1, 0.36, 1.0, 0.64], [2, 0.252, 0.5, 0.248])]

    def test_fair_coin_tight(self, capsys):
        _, out, _ = run(capsys, "sweep", str(DATA / "fair_coin.json"), "--n-max", "6")
        for line in out.strip().splitlines()[1:]:
            n, lhs, bound, gap = map(float, line.split(","))
            assert lhs == pytest.approx(1 / n, abs=1e-14)
            assert bound == pytest.approx(1 / n, abs=1e-14)
            assert abs(gap) <= 1e-14

    def test_point_mass(self, tmp_path, capsys):
        f = tmp_path / "pm.json"
        f.write_text(json.dumps({"version": "1", "dimension": 2,
                                 "iid": {"n": 1, "marginal": {"support": [[1, 2]], "generators": [[1]]}}}))
        _, out, _ = run(capsys, "sweep", str(f), "--n-max", "4")
        for line in out.strip().splitlines()[1:]:
            _, lhs, bound, _ = map(float, line.split(","))
            assert lhs == 0.0 and bound == 0.0

    def test_truncation(self, capsys):
        code, out, err = run(capsys, "sweep", str(DATA / "scenario_a.json"), "--n-max", "5", "--budget", "8")
        assert code == 0
        assert len(out.strip().splitlines()) == 4
        assert "truncated after n=3" in err

    def test_rejects_non_iid(self, capsys):
        assert run(capsys, "sweep", str(DATA / "scenario_b.json"), "--n-max", "2")[0] == 2


class TestFuzz:
    def test_zero_trials(self, capsys):
        code, out, _ = run(capsys, "fuzz", "--trials", "0")
        summary = json.loads(out)
        assert code == 0
        assert summary["trials"] == 0 and summary["records"] == []

    def test_small_campaign_deterministic(self, capsys):
        _, a, _ = run(capsys, "fuzz", "--seed", "7", "--trials", "15")
        _, b, _ = run(capsys, "fuzz", "--seed", "7", "--trials", "15")
        assert a == b
        assert json.loads(a)["failed"] == 0

    def test_records_ordered_and_seed_recorded(self):
        summary = fuzz(FuzzConfig(seed=3, trials=5))
        assert [r["trial"] for r in summary["records"]] == list(range(5))
        assert summary["config"]["seed"] == 3
        assert "PCG64" in summary["rng"]

    def test_parallel_matches_serial(self):
        cfg = FuzzConfig(seed=11, trials=6)
        assert fuzz(cfg, jobs=2) == fuzz(cfg, jobs=1)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sublinear_lab", "check", str(DATA / "scenario_a.json")],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["passed"]
