import json

import pytest

from core.errors import InvalidScenario
from handlers.sweep import parse_seeds
from run import main


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({"n": 4, "f": 1, "protocol": "jolteon", "seed": 5, "load_rate": 0.2,
                                "duration": 1_500}))
    return str(path)


@pytest.fixture
def finished_run(tmp_path, scenario_file):
    out = tmp_path / "out"
    assert main(["run", "--scenario", scenario_file, "--out", str(out)]) == 0
    return out


def test_run_writes_report_and_logs(finished_run):
    report = json.loads((finished_run / "report.json").read_text())
    assert report["safety_verdict"] == "PASS"
    assert report["commits_total"] > 0
    assert set(report["structural"].values()) == {"PASS"}
    assert (finished_run / "replica-0.jsonl").exists()
    assert (finished_run / "trace.sha256").read_text().strip()


def test_run_with_protocol_override(tmp_path, scenario_file):
    out = tmp_path / "ditto"
    assert main(["run", "--scenario", scenario_file, "--out", str(out), "--protocol", "ditto"]) == 0
    assert json.loads((out / "scenario.json").read_text())["protocol"] == "ditto"


def test_invalid_scenario_exits_2(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"n": 5, "f": 1, "protocol": "jolteon"}))
    assert main(["run", "--scenario", str(path), "--out", str(tmp_path / "o")]) == 2


def test_missing_scenario_file_exits_2(tmp_path):
    assert main(["run", "--scenario", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 2


def test_replay_matches_recorded_digest(finished_run):
    assert main(["replay", "--out", str(finished_run)]) == 0


def test_replay_detects_digest_mismatch(finished_run):
    (finished_run / "trace.sha256").write_text("0" * 64 + "\n")
    assert main(["replay", "--out", str(finished_run)]) == 1


def test_replay_without_recorded_run_exits_2(tmp_path):
    assert main(["replay", "--out", str(tmp_path)]) == 2


def test_check_accepts_untouched_logs(finished_run):
    assert main(["check", "--out", str(finished_run)]) == 0


def test_check_rejects_edited_log(finished_run):
    path = finished_run / "replica-3.jsonl"
    lines = path.read_text().splitlines()
    lines[0] = lines[0].replace('"time":', '"time":1', 1)
    path.write_text("\n".join(lines) + "\n")
    assert main(["check", "--out", str(finished_run)]) == 1


def test_check_on_empty_directory_exits_2(tmp_path):
    assert main(["check", "--out", str(tmp_path)]) == 2


def test_sweep_writes_summary(tmp_path, scenario_file):
    out = tmp_path / "sweep"
    assert main(["sweep", "--scenario", scenario_file, "--out", str(out), "--seeds", "2"]) == 0
    assert (out / "seed-5" / "report.json").exists()
    assert (out / "seed-6" / "report.json").exists()
    rows = (out / "sweep.csv").read_text().splitlines()
    assert len(rows) == 3 and rows[0].startswith("seed,")
    summary = json.loads((out / "sweep.json").read_text())
    assert summary["commits_total"]["runs"] == 2


@pytest.mark.parametrize("raw, expected", [(None, [7]), ("3", [7, 8, 9]), ("2-4", [2, 3, 4])])
def test_parse_seeds(raw, expected):
    assert parse_seeds(raw, 7) == expected


@pytest.mark.parametrize("raw", ["x", "5-2", "0"])
def test_parse_seeds_rejects(raw):
    with pytest.raises(InvalidScenario):
        parse_seeds(raw, 1)


def test_check_reports_undecodable_log(finished_run):
    path = finished_run / "replica-1.jsonl"
    path.write_bytes(path.read_bytes()[:5] + b"\xfe" + path.read_bytes()[6:])
    assert main(["check", "--out", str(finished_run)]) == 1
