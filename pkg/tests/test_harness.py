import json

import pytest

from dotswarm.harness.batch import BatchSummary, run_batch
from dotswarm.harness.cli import main
from dotswarm.harness.config import ConfigError, from_dict, load_config, parse_seeds
from dotswarm.harness.export import (EVENT_HEADER, SUMMARY_HEADER, TRACK_HEADER, export_tracks, read_events,
                                     read_track, trial_dir)
from dotswarm.harness.trial import TIMEOUT, run_trial

SMALL = {"robots": 2, "carriers": 1, "timeout_s": 6.0}


@pytest.fixture(scope="module")
def small():
    return from_dict(SMALL)


@pytest.fixture(scope="module")
def small_result(small):
    return run_trial(small, 3)


def test_parse_seeds():
    assert parse_seeds("0-3") == (0, 1, 2, 3)
    assert parse_seeds("1,4,7") == (1, 4, 7)
    assert parse_seeds(5) == (5,)
    assert parse_seeds([2, 1]) == (2, 1)
    for bad in ("3-1", "a", "", [-1]):
        with pytest.raises(ConfigError):
            parse_seeds(bad)


def test_config_validation():
    assert from_dict({}).robots == 5
    for bad in ({"colour": 1}, {"noise": {"irtof": {"sigma": 1}}}, {"rates_hz": {"physics": 100, "bt": 7}},
                {"robots": 2, "world": {"robot_poses": [[2, 0, 0]]}}):
        with pytest.raises(ConfigError):
            from_dict(bad)


def test_load_config_errors(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    p.write_text(json.dumps(SMALL))
    assert load_config(p).carriers == 1


def test_no_carriers_completes_immediately():
    r = run_trial(from_dict({"robots": 2, "carriers": 0}), 0)
    assert r.completed and r.completion_time == 0.0 and r.retrieved_count == 0


def test_timeout_result(small_result):
    r = small_result
    assert not r.completed and r.time_label == TIMEOUT
    assert r.row() == {"seed": 3, "retrieved": r.retrieved_count, "carriers": 1,
                       "completion_time_s": None, "status": TIMEOUT}


def test_tracks_sampled_at_10hz(small_result):
    tr = small_result.tracks
    assert len(tr) == 2
    times = [row[0] for row in tr[0]]
    assert times[0] == 0.0 and times == pytest.approx([i / 10 for i in range(len(times))])
    assert times[-1] == pytest.approx(6.0)


def test_export_byte_identical(small, small_result, tmp_path):
    a = export_tracks(small_result, tmp_path / "a")
    b = export_tracks(run_trial(small, 3), tmp_path / "b")
    assert [p.name for p in a] == [p.name for p in b]
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()
    assert (tmp_path / "a" / "robot_0.csv").read_text().splitlines()[0] == ",".join(TRACK_HEADER)
    assert (tmp_path / "a" / "events.csv").read_text().splitlines()[0] == ",".join(EVENT_HEADER)


def test_track_round_trip(small_result, tmp_path):
    export_tracks(small_result, tmp_path)
    rows = read_track(tmp_path / "robot_1.csv")
    assert len(rows) == len(small_result.tracks[1])
    assert rows[5][1] == pytest.approx(small_result.tracks[1][5][1], abs=1e-6)
    assert read_events(tmp_path / "events.csv") == [
        (round(t, 2), r, n, d) for t, r, n, d in small_result.events] or small_result.events == []


def test_events_consistent_with_tracks(small_result):
    carrying = {}
    for t, rid, name, _ in small_result.events:
        if name == "lifted":
            carrying[rid] = t
    for rid, t0 in carrying.items():
        later = [row for row in small_result.tracks[rid] if row[0] >= t0 + 1.1]
        assert not later or later[0][4] == 1


def test_batch_invariant_to_jobs(small, tmp_path):
    s1, o1 = run_batch(small, seeds=[0, 1], jobs=1, out=tmp_path / "j1")
    s2, o2 = run_batch(small, seeds=[0, 1], jobs=2, out=tmp_path / "j2")
    assert s1.rows == s2.rows
    for seed in (0, 1):
        for name in ("robot_0.csv", "robot_1.csv", "events.csv"):
            assert (trial_dir(tmp_path / "j1", seed) / name).read_bytes() == \
                   (trial_dir(tmp_path / "j2", seed) / name).read_bytes()


def test_summary_statistics():
    rows = [{"seed": 0, "retrieved": 5, "carriers": 5, "completion_time_s": 60.0, "status": "completed"},
            {"seed": 1, "retrieved": 5, "carriers": 5, "completion_time_s": 100.0, "status": "completed"},
            {"seed": 2, "retrieved": 3, "carriers": 5, "completion_time_s": None, "status": TIMEOUT}]
    s = BatchSummary(rows)
    assert s.mean_time == 80.0 and s.min_time == 60.0 and s.max_time == 100.0
    assert s.any_timeout and s.all_retrieved == 2 and s.errors == 0
    assert s.retrieval_rate == pytest.approx(13 / 15)


def test_cli_run_and_summarize(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(SMALL))
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--trials", "2", "--out", str(out), "--quiet"]) == 0
    assert (out / "summary.csv").read_text().splitlines()[0] == ",".join(SUMMARY_HEADER)
    assert sorted(p.name for p in out.glob("seed_*")) == ["seed_0000", "seed_0001"]
    before = (out / "summary.csv").read_bytes()
    assert main(["summarize", "--in", str(out)]) == 0
    assert (out / "summary.csv").read_bytes() == before
    assert "TIMEOUT" in capsys.readouterr().out


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"robots": "many"}))
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2
    assert main(["run", "--seeds", "3-1", "--out", str(tmp_path / "x")]) == 2
    assert main(["summarize", "--in", str(tmp_path / "empty")]) == 1
