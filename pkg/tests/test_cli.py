"""Command-line dispatch, exit codes and output files."""

from __future__ import annotations

import dataclasses
import json

import jsonschema
import numpy as np
import pytest

from pdpl.cli import main
from pdpl.mstats import TestReport as ReportFields
from pdpl.pipeline import REPORT_SCHEMA


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def sim_dir(tmp_path, capsys):
    code, _, _ = run(capsys, "simulate", "--seed", "5", "--out", str(tmp_path / "sim"))
    assert code == 0
    return tmp_path / "sim"


class TestDispatch:
    def test_no_arguments(self, capsys):
        code, _, err = run(capsys)
        assert code == 1 and "usage" in err

    def test_unknown_command(self, capsys):
        code, _, err = run(capsys, "dance")
        assert code == 1 and "invalid choice" in err

    def test_bad_option_value(self, capsys):
        assert run(capsys, "verify-game", "--format", "xml")[0] == 1
        assert run(capsys, "simulate", "--seed", "-3")[0] == 1

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "analyze", "--in", str(tmp_path / "nope.csv"))
        assert code == 1 and "error" in err


class TestVerifyGame:
    def test_text(self, capsys):
        code, out, _ = run(capsys, "verify-game", "--low", "0", "--high", "2")
        assert code == 0
        assert "PD: true" in out and "NE: {(Defect, Defect)}" in out
        assert "(-0.8, 1.2)" in out and "(0.4, 0.4)" in out

    def test_json(self, capsys):
        code, out, _ = run(capsys, "verify-game", "--format", "json")
        data = json.loads(out)
        assert code == 0 and data["is_prisoners_dilemma"] is True
        assert data["matrix"]["DC"] == [1.2, -0.8]

    def test_csv(self, capsys):
        _, out, _ = run(capsys, "verify-game", "--format", "csv")
        lines = out.strip().splitlines()
        assert lines[0].startswith("row,col") and "Defect,Defect,0.0,0.0,True,False" in lines

    def test_invalid_efforts(self, capsys):
        assert run(capsys, "verify-game", "--low", "2", "--high", "1")[0] == 1

    def test_out_file(self, capsys, tmp_path):
        run(capsys, "verify-game", "--format", "json", "--out", str(tmp_path / "g.json"))
        assert json.loads((tmp_path / "g.json").read_text())["nash_equilibria"] == ["(Defect, Defect)"]


class TestScore:
    def test_sheet_and_leaderboard(self, capsys, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("student_id,course,session,pre,post,sheet_grade,partner_id\n"
                     "a,c,1,,,2,b\nb,c,1,,,0,a\nx,c,1,,,1.5,\n")
        code, out, _ = run(capsys, "score", "--session", str(p), "--out", str(tmp_path / "scores.csv"))
        assert code == 0
        rows = (tmp_path / "scores.csv").read_text().splitlines()
        assert "c,1,a,b,2.0,1.2,-0.8,false" in rows and "c,1,x,,1.5,,,true" in rows
        board = json.loads((tmp_path / "scores_leaderboard.json").read_text())
        # the unpaired student is listed with a zero total
        assert [e["student_id"] for e in board["c"]["leaderboard"]] == ["a", "b", "x"]
        assert board["c"]["totals"]["x"]["sessions_scored"] == 0

    def test_non_mutual(self, capsys, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("student_id,course,session,pre,post,sheet_grade,partner_id\na,c,1,,,2,b\nb,c,1,,,0,\n")
        assert run(capsys, "score", "--session", str(p))[0] == 1


class TestSimulate:
    def test_outputs(self, sim_dir):
        assert {p.name for p in sim_dir.iterdir()} == {"gradebook.csv", "pairings.csv", "summary.json"}
        info = json.loads((sim_dir / "summary.json").read_text())
        assert info["seed"] == 5 and len(info["reformation_rates_any"]) == 6

    def test_bit_stable(self, capsys, tmp_path, sim_dir):
        run(capsys, "simulate", "--seed", "5", "--out", str(tmp_path / "again"))
        for name in ("gradebook.csv", "pairings.csv", "summary.json"):
            assert (tmp_path / "again" / name).read_bytes() == (sim_dir / name).read_bytes()

    def test_config_file(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"seed": 3, "simulation": {"n_students": 6, "n_sessions": 2},
                                   "output": {"dir": str(tmp_path / "o")}}))
        code, out, _ = run(capsys, "simulate", "--config", str(cfg))
        assert code == 0 and json.loads(out)["n_students"] == 6
        assert (tmp_path / "o" / "gradebook.csv").exists()

    def test_config_unknown_key(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"simulation": {"students": 6}}))
        code, _, err = run(capsys, "simulate", "--config", str(cfg))
        assert code == 1 and "students" in err


class TestImpute:
    def test_gradebook_input(self, capsys, tmp_path, sim_dir):
        out = tmp_path / "filled.csv"
        code, info, _ = run(capsys, "impute", "--method", "knn", "--in", str(sim_dir / "gradebook.csv"),
                            "--out", str(out))
        assert code == 0 and json.loads(info)["k"] == 5
        header, *rows = out.read_text().splitlines()
        assert header.startswith("student_id,course,pre_1") and all(",," not in r for r in rows)

    def test_fkm_runs_write_files(self, capsys, tmp_path, sim_dir):
        out = tmp_path / "f.csv"
        code, info, _ = run(capsys, "impute", "--method", "fkm", "--runs", "2", "--in",
                            str(sim_dir / "gradebook.csv"), "--out", str(out))
        assert code == 0
        assert (tmp_path / "f_run1.csv").exists() and (tmp_path / "f_run2.csv").exists()
        assert len({o["seed"] for o in json.loads(info)["outputs"]}) == 2

    def test_wide_to_stdout(self, capsys, tmp_path):
        p = tmp_path / "w.csv"
        p.write_text("id,a,b\nr1,1,\nr2,3,4\n")
        code, out, _ = run(capsys, "impute", "--method", "mean", "--in", str(p))
        assert code == 0 and out.splitlines()[1] == "r1,1.0,4.0"


class TestAnalyze:
    def test_report_fields(self, capsys, tmp_path, sim_dir):
        out = tmp_path / "report.json"
        code, _, _ = run(capsys, "analyze", "--in", str(sim_dir / "gradebook.csv"), "--out", str(out))
        assert code == 0
        rep = json.loads(out.read_text())
        jsonschema.validate(rep, REPORT_SCHEMA)
        fields = {f.name for f in dataclasses.fields(ReportFields)}
        for res in rep["results"]:
            assert fields <= set(res) and all(res[f] is not None for f in fields)
        assert rep["seed"] == 0 and rep["method"] == "mean"

    def test_wide_needs_columns(self, capsys, tmp_path):
        p = tmp_path / "w.csv"
        p.write_text("a,b\n1,2\n")
        code, _, err = run(capsys, "analyze", "--in", str(p))
        assert code == 1 and "--pre-cols" in err

    def test_singular_exits_two(self, capsys, tmp_path):
        rows = ["id,pre1,pre2,post1,post2"]
        r = np.random.default_rng(0)
        for i in range(8):
            a, b = r.uniform(0, 1, 2)
            rows.append(f"s{i},{a},{b},{a + 0.5},{b + 0.5}")
        p = tmp_path / "w.csv"
        p.write_text("\n".join(rows) + "\n")
        code, _, err = run(capsys, "analyze", "--in", str(p), "--pre-cols", "pre*", "--post-cols", "post*",
                           "--min-sessions", "0")
        assert code == 2 and "singular" in err

    def test_text_and_csv(self, capsys, sim_dir):
        code, out, _ = run(capsys, "analyze", "--in", str(sim_dir / "gradebook.csv"), "--format", "text")
        assert code == 0 and "reject H0" in out
        code, out, _ = run(capsys, "analyze", "--in", str(sim_dir / "gradebook.csv"), "--format", "csv",
                           "--impute", "median")
        assert code == 0 and out.startswith("group,run,seed")


class TestReport:
    def test_table(self, capsys, sim_dir):
        code, out, _ = run(capsys, "report", "--in", str(sim_dir / "gradebook.csv"))
        assert code == 0
        for label in ("mean", "median", "knn", "fkm (run 1)", "fkm (run 3)"):
            assert label in out

    def test_json_reports_valid(self, capsys, sim_dir):
        code, out, _ = run(capsys, "report", "--in", str(sim_dir / "gradebook.csv"), "--format", "json",
                           "--runs", "2")
        table = json.loads(out)
        assert code == 0 and len(table["rows"]) == 5
        for rep in table["reports"]:
            jsonschema.validate(rep, REPORT_SCHEMA)
