import csv
import json
import shutil
from pathlib import Path

import pytest

from datacomp.cli import main

DEMO = Path(__file__).resolve().parents[1] / "configs" / "demo.json"


def run(out, *argv, config=DEMO):
    return main(["--config", str(config), "--out", str(out), *argv])


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    out = tmp_path_factory.mktemp("demo")
    assert run(out, "simulate") == 0
    assert run(out, "design") == 0
    assert run(out, "simulate", "--test-manifest", str(out / "test_manifest.csv")) == 0
    assert run(out, "mock", "--pattern", "all_correct", "--pattern", "all_no_source") == 0
    return out


@pytest.fixture
def work(built, tmp_path):
    shutil.copytree(built, tmp_path, dirs_exist_ok=True)
    return tmp_path


def test_design_outputs(built):
    report = json.loads((built / "design_report.json").read_text())
    assert report["invariants"]["passed"] is True
    test_ids = [r["run_id"] for r in rows(built / "test_manifest.csv")]
    assert list(rows(built / "test_manifest.csv")[0]) == ["run_id"]
    host = {r["run_id"]: r for r in rows(built / "host_manifest.csv")}
    assert {host[r]["split"] for r in test_ids} == {"PUBLIC", "PRIVATE"}
    train = rows(built / "train_manifest.csv")
    assert train and "split" not in train[0]
    assert all(host[r["run_id"]]["split"] == "TRAIN" for r in train)


def test_design_rerun_is_byte_identical(work):
    before = {n: (work / n).read_bytes() for n in ("host_manifest.csv", "test_manifest.csv", "design_report.json")}
    assert run(work, "design") == 0
    assert {n: (work / n).read_bytes() for n in before} == before


def test_score_perfect_submission(work, capsys):
    capsys.readouterr()
    assert run(work, "score", "--submission", str(work / "mocks" / "ALL_CORRECT.csv"),
               "--timestamp", "2026-03-01T10:00:00Z") == 0
    out = json.loads(capsys.readouterr().out)
    assert out["public_score"] == pytest.approx(1.0) and out["private_score"] == pytest.approx(1.0)


def test_invalid_submission_leaves_board_untouched(work):
    assert run(work, "score", "--submission", str(work / "teams" / "alpha.csv"),
               "--timestamp", "2026-03-01T10:00:00Z") == 0
    board = (work / "leaderboard_state.json").read_bytes()
    lines = (work / "teams" / "bravo.csv").read_text().splitlines()
    bad = work / "bravo.csv"
    bad.write_text("\n".join(lines[:-1]) + "\n")
    assert run(work, "score", "--submission", str(bad), "--timestamp", "2026-03-01T11:00:00Z") == 1
    assert (work / "leaderboard_state.json").read_bytes() == board


def test_rescoring_is_stable(work, capsys):
    sub = str(work / "teams" / "charlie.csv")
    capsys.readouterr()
    run(work, "score", "--submission", sub, "--timestamp", "2026-03-01T10:00:00Z")
    first = json.loads(capsys.readouterr().out)
    run(work, "score", "--submission", sub, "--timestamp", "2026-03-01T10:05:00Z")
    second = json.loads(capsys.readouterr().out)
    assert first == second
    state = json.loads((work / "leaderboard_state.json").read_text())
    assert state["entries"][0]["submission_count"] == 2


def test_leaderboard_is_sorted(work, capsys):
    for i, team in enumerate(("charlie", "alpha", "bravo")):
        assert run(work, "score", "--submission", str(work / "teams" / f"{team}.csv"),
                   "--timestamp", f"2026-03-01T1{i}:00:00Z") == 0
    capsys.readouterr()
    assert run(work, "leaderboard", "--private") == 0
    table = json.loads(capsys.readouterr().out)
    scores = [e["best_private_score"] for e in table]
    assert scores == sorted(scores, reverse=True) and len(table) == 3
    assert table[0]["team_id"] == "alpha"
    assert json.loads((work / "reports" / "leaderboard_private.json").read_text()) == table


def test_infeasible_design_exits_2(work):
    cfg = json.loads(DEMO.read_text())
    cfg["split"]["targets"]["PRIVATE"]["HEU"] = 5000
    path = work / "big.json"
    path.write_text(json.dumps(cfg))
    assert run(work, "design", config=path) == 2


def test_unknown_config_key_exits_1(work):
    cfg = json.loads(DEMO.read_text())
    cfg["colour"] = "red"
    path = work / "bad.json"
    path.write_text(json.dumps(cfg))
    assert run(work, "design", config=path) == 1


def test_separable_response_exits_3(work):
    assert run(work, "analyze", "glm", "--submission", str(work / "mocks" / "ALL_CORRECT.csv"),
               "--category", "HEU", "--response", "detect", "--terms", "snr") == 3


def test_confusion_of_perfect_submission(work):
    assert run(work, "analyze", "confusion", "--submission", str(work / "mocks" / "ALL_CORRECT.csv")) == 0
    for r in rows(work / "reports" / "identification_confusion.csv"):
        if r["proportion"]:
            assert float(r["proportion"]) == (1.0 if r["true"] == r["predicted"] else 0.0)


def test_agreement_with_itself(work, capsys):
    sub = str(work / "teams" / "alpha.csv")
    capsys.readouterr()
    assert run(work, "analyze", "agreement", "--submission", sub, "--submission", sub) == 0
    assert json.loads(capsys.readouterr().out)["off_diagonal"] == 0


def test_glm_writes_fit_and_surface(work):
    assert run(work, "analyze", "glm", "--submission", str(work / "teams" / "charlie.csv"),
               "--category", "HEU", "--response", "detect", "--x", "snr", "--y", "speed", "--grid", "5") == 0
    report = json.loads((work / "reports" / "glm_fit.json").read_text())
    assert "snr" in report["terms"] and report["lack_of_fit_p"] > 0.05
    surface = rows(work / "reports" / "surface.csv")
    assert len(surface) == 25
    assert all(0 < float(r["lower"]) <= float(r["estimate"]) <= float(r["upper"]) < 1 for r in surface)


def test_compare_writes_buckets(work):
    a, b = (str(work / "teams" / f"{t}.csv") for t in ("alpha", "charlie"))
    common = ["--category", "WGPu", "--response", "detect", "--terms", "snr,speed",
              "--x", "snr", "--y", "speed", "--grid", "6"]
    assert run(work, "analyze", "compare", "--submission", a, "--submission", b, *common) == 0
    diff = rows(work / "reports" / "difference.csv")
    assert len(diff) == 36
    assert {r["bucket"] for r in diff} <= {"<0.01", "[0.01,0.05)", "[0.05,0.1)", "none"}
    assert run(work, "analyze", "pa", "--submission", a, "--submission", b, *common) == 0
    assert all(0 <= float(r["pa"]) <= 1 for r in rows(work / "reports" / "agreement_probability.csv"))


def test_weights_check(work):
    w = work / "w.json"
    w.write_text(json.dumps([{"w_det": 0.5, "w_iden": 0.3, "w_loc": 0.2},
                             {"w_det": 0.2, "w_iden": 0.3, "w_loc": 0.5}]))
    assert run(work, "weights-check", "--weights", str(w)) == 0
    table = json.loads((work / "reports" / "weights_check.json").read_text())
    assert len(table["rankings"]) == 2
    assert all(r[0]["team_id"] == "ALL_CORRECT" for r in table["rankings"])
