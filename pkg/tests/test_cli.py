import io
import json
from pathlib import Path

import numpy as np
import pytest

from radarqa import cli
from radarqa.core import InvariantError, PerformanceLevel, RadarFrame
from radarqa.ingest import write_frame
from radarqa.reward import Task, parse_rating

from conftest import FIXTURE_GT, FIXTURE_PRED


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.main([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def fixture_files(tmp_path):
    gt = write_frame(tmp_path / "gt.pgm", RadarFrame(FIXTURE_GT))
    pred = write_frame(tmp_path / "pred.pgm", RadarFrame(FIXTURE_PRED))
    return gt, pred


@pytest.fixture
def synth_dir(tmp_path):
    def make(name, *extra):
        d = tmp_path / name
        code, out, _ = run("synth", "--seed", 3, "--frames", 4, "--width", 24, "--height", 24,
                           "--out", d, *extra)
        assert code == 0
        return d / "manifest.json"
    return make


def test_rate_frame_fixture(fixture_files):
    gt, pred = fixture_files
    code, out, err = run("rate-frame", "--gt", gt, "--pred", pred)
    assert code == 0 and err == ""
    data = json.loads(out)
    assert data["miss"] == "Fair" and data["false_alarm"] == "Fair"
    assert "overall" not in data
    assert parse_rating(out, Task.FRAME, include_overall=False).entries["miss"] is PerformanceLevel.FAIR


def test_rate_frame_identical_and_aggregate(fixture_files):
    gt, _ = fixture_files
    code, out, err = run("rate-frame", "--gt", gt, "--pred", gt, "--aggregate")
    assert code == 0
    assert set(json.loads(out).values()) == {"Great"}
    assert "heuristic" in err
    assert parse_rating(out, Task.FRAME) is not None


def test_rate_frame_text_and_report(fixture_files):
    gt, pred = fixture_files
    code, out, _ = run("rate-frame", "--gt", gt, "--pred", pred, "--text")
    assert code == 0 and out.startswith("miss") and "0.2500" in out
    code, out, _ = run("rate-frame", "--gt", gt, "--pred", pred, "--report")
    assert json.loads(out)["contingency"] == {"hits": 6, "misses": 2, "false_alarms": 2,
                                              "correct_negatives": 6}


def test_missing_file_exit_2(tmp_path, fixture_files):
    gt, _ = fixture_files
    missing = tmp_path / "absent.pgm"
    code, _, err = run("rate-frame", "--gt", gt, "--pred", missing)
    assert code == 2 and str(missing) in err


def test_bad_config_exit_2(tmp_path, fixture_files):
    gt, pred = fixture_files
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"no_such_field": 1}')
    assert run("rate-frame", "--gt", gt, "--pred", pred, "--config", cfg)[0] == 2
    cfg.write_text('{"precipitation_threshold": 300}')
    assert run("rate-frame", "--gt", gt, "--pred", pred, "--config", cfg)[0] == 2


def test_internal_error_exit_3(monkeypatch, fixture_files):
    gt, pred = fixture_files

    def boom(*a, **k):
        raise InvariantError("counts do not sum")

    monkeypatch.setattr(cli, "analyze_frame", boom)
    code, _, err = run("rate-frame", "--gt", gt, "--pred", pred)
    assert code == 3 and "internal error" in err

    monkeypatch.setattr(cli, "analyze_frame", lambda *a, **k: 1 / 0)
    assert run("rate-frame", "--gt", gt, "--pred", pred)[0] == 3


def test_rate_sequence(synth_dir, tmp_path):
    same = synth_dir("same")
    code, out, _ = run("rate-sequence", "--manifest", same)
    assert code == 0
    data = json.loads(out)
    assert data == {"cumulative_precipitation": "Great", "high_value_retain": "Great"}

    damp = synth_dir("damp", "--degrade", "gain:0.9")
    code, out, _ = run("rate-sequence", "--manifest", damp, "--text")
    assert code == 0 and "Underestimate" in out
    code, out, _ = run("rate-sequence", "--manifest", damp, "--report", "--workers", 2)
    assert json.loads(out)["cumulative_difference"] == "Underestimate"


def test_rate_sequence_with_labels_parses_strictly(synth_dir, tmp_path):
    labels = tmp_path / "labels.json"
    labels.write_text(json.dumps({"dynamic_consistency_performance": "good"}))
    code, out, _ = run("rate-sequence", "--manifest", synth_dir("lab"), "--labels", labels, "--aggregate")
    assert code == 0
    r = parse_rating(out, Task.SEQUENCE)
    assert r.entries["dynamic_consistency"] is PerformanceLevel.GOOD
    assert r.entries["overall"] is PerformanceLevel.GREAT


def test_rate_sequence_length_mismatch_exit_2(synth_dir):
    m = synth_dir("short")
    data = json.loads(m.read_text())
    data["prediction"] = data["prediction"][:-1]
    m.write_text(json.dumps(data))
    code, _, err = run("rate-sequence", "--manifest", m)
    assert code == 2 and "4" in err and "3" in err


def test_describe(synth_dir, tmp_path):
    m = synth_dir("desc")
    code, out, _ = run("describe", "--manifest", m)
    assert code == 0
    assert "cumulate precipitation matches" in out and "Great" in out
    labels = tmp_path / "l.json"
    labels.write_text(json.dumps({"move_direction": "northeast"}))
    code, out2, _ = run("describe", "--manifest", m, "--labels", labels)
    assert code == 0 and "northeast" in out2
    labels.write_text(json.dumps({"bogus": "x"}))
    assert run("describe", "--manifest", m, "--labels", labels)[0] == 2


def test_describe_polish_unreachable(synth_dir, monkeypatch):
    m = synth_dir("pol")
    monkeypatch.delenv("RADARQA_POLISH_URL", raising=False)
    plain = run("describe", "--manifest", m)[1]
    code, out, err = run("describe", "--manifest", m, "--polish",
                         "--polish-url", "http://127.0.0.1:9/v1", "--polish-timeout", 0.5)
    assert code == 0 and out == plain and "warning" in err


def test_describe_frame_manifest(tmp_path):
    code, _, _ = run("synth", "--frames", 1, "--width", 12, "--height", 12, "--out", tmp_path / "f")
    assert code == 0
    code, out, _ = run("describe", "--manifest", tmp_path / "f" / "manifest.json")
    assert code == 0 and "Miss performance is Great." in out


def _write_lines(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records))
    return path


SAMPLE = {"miss": "Great", "false_alarm": "Good", "sharpness": "Fair",
          "high_value_match": "Poor", "overall": "Fair"}


def test_reward_command(tmp_path):
    truth = tmp_path / "truth.json"
    truth.write_text(json.dumps(SAMPLE))
    three = {**SAMPLE, "miss": "Poor", "sharpness": "Great"}
    cands = _write_lines(tmp_path / "c.jsonl", [{"candidate": json.dumps(SAMPLE)},
                                                 {"candidate": json.dumps(three)},
                                                 {"candidate": "garbage"}])
    code, out, _ = run("reward", "--candidates", cands, "--truth", truth)
    assert code == 0
    rows = [json.loads(line) for line in out.splitlines()]
    assert [r["accuracy_reward"] for r in rows] == [1.0, 0.6, 0.0]
    assert [r["format_reward"] for r in rows] == [1, 1, 0]

    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    assert run("reward", "--candidates", empty, "--truth", truth) == (0, "", "")
    assert run("reward", "--candidates", cands)[0] == 2


def test_verify(fixture_files, tmp_path):
    gt, pred = fixture_files
    code, out, _ = run("verify", "--gt", gt, "--pred", pred, "--json")
    data = json.loads(out)
    assert code == 0 and data["threshold"] == 74
    assert abs(data["csi"] - 0.6) <= 1e-9 and abs(data["ets"] - 1 / 3) <= 1e-9
    assert data["ssim"] is None
    code, out, _ = run("verify", "--gt", gt, "--pred", gt, "--json")
    assert json.loads(out)["csi"] == 1.0
    zero = write_frame(tmp_path / "z.pgm", RadarFrame(np.zeros((8, 8))))
    code, out, _ = run("verify", "--gt", zero, "--pred", zero)
    assert code == 0 and "undefined" in out and "ssim      1.000000" in out


def test_synth_outputs(tmp_path):
    for k in (1, 2):
        assert run("synth", "--seed", 5, "--frames", 12, "--out", tmp_path / f"r{k}",
                   "--degrade", "blur:3")[0] == 0
    a = sorted(p.name for p in (tmp_path / "r1").iterdir())
    assert len([n for n in a if n.startswith("gt_")]) == 12
    assert len([n for n in a if n.startswith("pred_")]) == 12
    for name in a:
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()
    manifest = json.loads((tmp_path / "r1" / "manifest.json").read_text())
    assert manifest["metadata"]["degrade"] == "blur:3"
    assert manifest["prediction"][0] == "pred_000.pgm"
    assert run("synth", "--out", tmp_path / "x", "--advection", "oops")[0] == 2
    assert run("synth", "--out", tmp_path / "y", "--degrade", "wobble:1")[0] == 2


@pytest.mark.parametrize("fmt", ["npy", "raw"])
def test_synth_formats(tmp_path, fmt):
    d = tmp_path / fmt
    assert run("synth", "--frames", 2, "--width", 10, "--height", 10, "--out", d, "--format", fmt)[0] == 0
    assert run("rate-sequence", "--manifest", d / "manifest.json")[0] == 0


def test_render(tmp_path, fixture_files):
    gt, _ = fixture_files
    out_png = tmp_path / "gt.png"
    assert run("render", "--frame", gt, "--out", out_png)[0] == 0
    assert Path(out_png).read_bytes()[:4] == b"\x89PNG"
    assert run("render", "--frame", gt, "--out", tmp_path / "gt.bmp")[0] == 2


def test_heuristic_overall():
    L = PerformanceLevel
    assert cli.heuristic_overall([L.GREAT, L.GREAT, L.POOR]) is L.GREAT
    assert cli.heuristic_overall([L.GREAT, L.GOOD, L.FAIR, L.POOR]) is L.FAIR
    assert cli.heuristic_overall([L.GREAT, L.GOOD]) is L.GOOD
