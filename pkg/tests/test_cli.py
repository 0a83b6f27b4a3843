import json

import numpy as np
import pytest

from isoperturb import cli, spaces
from isoperturb.spaces import BoundCheckReport, PairMargin


AFFINE = '{"kind": "affine", "M": 1.0, "L": 1.0}'
KINK = '{"kind": "vestfrid1d", "eps": 0.1}'


def run(argv):
    return cli.main(argv)


class TestBound:
    def test_csv_output(self, tmp_path, capsys):
        code = run(["bound", "--phi", AFFINE, "--d", "4,64,1024", "--deterministic"])
        out = capsys.readouterr().out
        assert code == 0
        lines = [l for l in out.splitlines() if not l.startswith("#")]
        assert lines[0] == "d,n_star,k,bound,method,hyers_ulam,trivial"
        assert lines[3].startswith("1024.0,4,32,63.0,affine-closed-form")

    def test_json_output_to_file(self, tmp_path):
        dest = tmp_path / "b.json"
        code = run([
            "bound", "--phi", AFFINE, "--d", "1024", "--format", "json",
            "--out", str(dest), "--deterministic",
        ])
        assert code == 0
        doc = json.loads(dest.read_text())
        assert doc["rows"][0]["bound"] == 63.0
        assert doc["meta"]["subcommand"] == "bound"
        assert "generated_at" not in doc["meta"]

    def test_overflow_sentinel(self, capsys):
        # second distance overflows float range at every depth; the sweep
        # keeps going and marks that row instead of dying
        code = run([
            "bound", "--phi", '{"kind": "affine", "M": 10.0, "L": 0.0}',
            "--d", "4,1e308", "--deterministic",
        ])
        out = capsys.readouterr().out
        assert code == 0
        lines = [l for l in out.splitlines() if not l.startswith("#")]
        assert lines[1].startswith("4.0,")
        assert "overflow" in lines[2]
        assert "inf" not in out

    def test_phi_from_file(self, tmp_path, capsys):
        src = tmp_path / "phi.json"
        src.write_text(AFFINE)
        code = run(["bound", "--phi", f"@{src}", "--d", "1024", "--deterministic"])
        assert code == 0
        assert "63.0" in capsys.readouterr().out

    def test_geometric_grid(self, capsys):
        code = run([
            "bound", "--phi", AFFINE, "--d-min", "1", "--d-max", "100",
            "--d-count", "3", "--deterministic",
        ])
        out = capsys.readouterr().out
        assert code == 0
        assert len([l for l in out.splitlines() if not l.startswith("#")]) == 4

    def test_missing_phi_is_config_error(self, capsys):
        assert run(["bound", "--d", "1"]) == 2

    def test_require_halving_exit_code(self, capsys):
        code = run([
            "bound", "--phi", '{"kind": "tabulated", "knots": [[1,1],[2,10]]}',
            "--d", "8", "--require-halving",
        ])
        assert code == 3

    def test_plot_needs_out(self, capsys):
        code = run(["bound", "--phi", AFFINE, "--d", "4", "--plot"])
        assert code == 2

    def test_plot_writes_png(self, tmp_path):
        dest = tmp_path / "b.csv"
        code = run([
            "bound", "--phi", AFFINE, "--d", "4,64", "--out", str(dest),
            "--plot", "--deterministic",
        ])
        assert code == 0
        png = tmp_path / "b.png"
        assert png.exists()
        assert png.read_bytes()[:4] == b"\x89PNG"


class TestSimulate:
    def test_clean_run(self, capsys):
        code = run([
            "simulate", "--map", KINK, "--pairs", "20", "--deterministic",
        ])
        out = capsys.readouterr().out
        assert code == 0
        lines = [l for l in out.splitlines() if not l.startswith("#")]
        assert lines[0] == "pair_id,d,deviation,bound,margin"
        assert len(lines) == 21

    def test_jobs_do_not_change_bytes(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path, jobs in ((a, "1"), (b, "4")):
            assert run([
                "simulate", "--map", KINK, "--pairs", "40", "--seed", "3",
                "--jobs", jobs, "--out", str(path), "--deterministic",
            ]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_underdominating_phi_exits_3(self):
        code = run([
            "simulate", "--map", KINK, "--phi", '{"kind": "identity"}',
            "--pairs", "5",
        ])
        assert code == 3

    def test_violations_exit_1(self, monkeypatch, capsys):
        row = PairMargin(pair_id=0, d=1.0, deviation=2.0, bound=1.0, margin=-1.0)
        fake = BoundCheckReport(rows=(row,), violations=(row,), passed=False, tol=1e-9)
        monkeypatch.setattr(cli.spaces, "check_against_bound", lambda *a, **k: fake)
        code = run(["simulate", "--map", KINK, "--pairs", "1", "--deterministic"])
        assert code == 1
        assert "violations=1" in capsys.readouterr().out


class TestRecover:
    MAP = json.dumps({
        "kind": "composite",
        "parts": [
            {"kind": "coordinatewise_vestfrid", "eps": [0.01, 0.02, 0.015]},
            {"kind": "signed_permutation", "sigma": [2, 0, 1], "signs": [1, -1, 1]},
        ],
    })

    def test_json_payload(self, capsys):
        code = run(["recover", "--map", self.MAP, "--deterministic"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["sigma"] == [2, 0, 1]
        assert doc["lambda"] == [1, -1, 1]
        assert doc["D"] == pytest.approx(14.0 - 13.0 * 1.02)
        assert doc["m"] == 1.0
        assert doc["margins"]["condition_ii"] == pytest.approx(16 - 15 * 1.02**2)

    def test_stability_samples(self, capsys):
        code = run([
            "recover", "--map", self.MAP, "--stability-samples", "50",
            "--deterministic",
        ])
        doc = json.loads(capsys.readouterr().out)
        assert code == 0
        assert doc["margins"]["stability_sup_excess"] <= 1e-9

    def test_csv_view(self, capsys):
        code = run(["recover", "--map", self.MAP, "--format", "csv", "--deterministic"])
        out = capsys.readouterr().out
        assert code == 0
        lines = [l for l in out.splitlines() if not l.startswith("#")]
        assert lines[0] == "coordinate,sigma,sign"
        assert lines[1] == "0,2,1"

    def test_m_too_large_exits_4(self):
        bad = json.dumps({"kind": "coordinatewise_vestfrid", "eps": [0.04, 0.04]})
        assert run(["recover", "--map", bad]) == 4

    def test_recovery_failure_exits_5(self, tmp_path):
        table = tmp_path / "t.csv"
        table.write_text(
            "in_0,in_1,out_0,out_1\n"
            "1.0,0.0,1.0,0.0\n-1.0,0.0,-1.0,0.0\n"
            "0.0,1.0,1.0,0.0\n0.0,-1.0,-1.0,0.0\n"
        )
        code = run([
            "recover", "--table", str(table), "--claimed-m", "1.0",
            "--claimed-l", "0.0",
        ])
        assert code == 5

    def test_table_requires_claims(self, tmp_path):
        table = tmp_path / "t.csv"
        table.write_text("in_0,out_0\n1.0,1.0\n")
        assert run(["recover", "--table", str(table)]) == 2

    def test_map_and_table_exclusive(self):
        assert run(["recover", "--map", self.MAP, "--table", "x.csv"]) == 2


class TestKeps:
    def test_column_names(self, capsys):
        code = run(["keps", "--eps", "0.1", "--budget", "0", "--deterministic"])
        out = capsys.readouterr().out
        assert code == 0
        header = [l for l in out.splitlines() if not l.startswith("#")][0]
        assert header == "eps,vestfrid_ratio,best_found,cor33_bound"

    def test_sweep_values(self, capsys):
        code = run([
            "keps", "--eps", "0.1,0.05", "--budget", "0", "--deterministic",
        ])
        out = capsys.readouterr().out
        rows = [l.split(",") for l in out.splitlines() if not l.startswith("#")][1:]
        assert code == 0
        assert float(rows[0][1]) == pytest.approx(0.47727272727, abs=1e-9)
        assert float(rows[0][2]) >= float(rows[0][1]) - 1e-9
        assert float(rows[0][3]) == 3.0
        assert float(rows[1][1]) == pytest.approx(0.48809523809, abs=1e-9)

    def test_eps_out_of_range_exits_2(self):
        assert run(["keps", "--eps", "0.5", "--budget", "0"]) == 2

    def test_jobs_do_not_change_bytes(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path, jobs in ((a, "1"), (b, "3")):
            assert run([
                "keps", "--eps-min", "0.02", "--eps-max", "0.15",
                "--eps-count", "5", "--budget", "60", "--seed", "2",
                "--jobs", jobs, "--out", str(path), "--deterministic",
            ]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestVerifySuite:
    def test_subset_runs_and_reports(self, capsys):
        code = run(["verify-suite", "--only", "8,10", "--deterministic"])
        out = capsys.readouterr().out
        assert code == 0
        assert out.count("PASS") == 2
        assert "margin_identity" in out and "power_growth" in out

    def test_failure_exits_1(self, monkeypatch, capsys):
        from isoperturb.verify import CriterionResult

        monkeypatch.setattr(
            cli.verify,
            "run_suite",
            lambda only=None, seed=None: [
                CriterionResult(cid=1, name="midpoint_soundness", passed=False,
                                detail="forced")
            ],
        )
        code = run(["verify-suite", "--only", "1"])
        assert code == 1
        assert "FAIL" in capsys.readouterr().out

    def test_unknown_criterion_exits_2(self):
        assert run(["verify-suite", "--only", "nonsense"]) == 2

    def test_module_group_alias(self, capsys):
        # a group name selects every criterion that exercises that module
        code = run(["verify-suite", "--only", "bounds", "--deterministic"])
        out = capsys.readouterr().out
        assert code == 0
        assert out.count("PASS") == 3
        for name in ("additive_schedule", "bilip_domination", "power_growth"):
            assert name in out

    def test_out_file(self, tmp_path, capsys):
        dest = tmp_path / "v.json"
        code = run([
            "verify-suite", "--only", "8", "--format", "json", "--out", str(dest),
            "--deterministic",
        ])
        assert code == 0
        doc = json.loads(dest.read_text())
        assert doc["rows"][0]["passed"] is True


class TestConfigFile:
    def test_defaults_from_config(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "subcommand": "keps", "eps": [0.1], "budget": 0, "deterministic": True,
        }))
        code = run(["keps", "--config", str(cfg)])
        out = capsys.readouterr().out
        assert code == 0
        assert "0.1," in out

    def test_cli_wins_over_config(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"subcommand": "keps", "eps": [0.1], "budget": 500}))
        code = run([
            "keps", "--config", str(cfg), "--budget", "0", "--deterministic",
        ])
        assert code == 0
        assert "# budget=0" in capsys.readouterr().out

    def test_unknown_key_rejected(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"frobnicate": 1}))
        assert run(["keps", "--eps", "0.1", "--config", str(cfg)]) == 2

    def test_wrong_subcommand_rejected(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"subcommand": "bound"}))
        assert run(["keps", "--eps", "0.1", "--config", str(cfg)]) == 2


def test_determinism_is_byte_level(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["bound", "--phi", AFFINE, "--d-min", "1", "--d-max", "1e6",
            "--d-count", "7", "--format", "json", "--deterministic"]
    assert run(args + ["--out", str(a)]) == 0
    assert run(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_timestamp_present_without_deterministic(tmp_path):
    dest = tmp_path / "x.json"
    assert run(["bound", "--phi", AFFINE, "--d", "4", "--format", "json",
                "--out", str(dest)]) == 0
    assert "generated_at" in json.loads(dest.read_text())["meta"]
