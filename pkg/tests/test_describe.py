import dataclasses
import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from radarqa.core import Direction, RadarFrame, RadarSequence, RainfallLevel
from radarqa.describe import (
    HUMAN_LABEL_KEYS,
    LabelValidationError,
    PolishConfig,
    describe_frame,
    describe_sequence,
    frame_sentences,
    load_labels,
    polish,
)
from radarqa.frame_metrics import MismatchType, analyze_frame
from radarqa.ingest import canonical_blob_sequence
from radarqa.sequence_metrics import CumulativeDifference, analyze_sequence


@pytest.fixture
def perfect_report():
    g = canonical_blob_sequence(1)[0]
    return analyze_frame(g, g)


def test_miss_sentence(perfect_report):
    r = dataclasses.replace(perfect_report, miss_direction=Direction.N,
                            raw_level_miss=RainfallLevel.INTENSE, miss_level=RainfallLevel.LIGHT)
    assert "In the north, intense precipitation is misclassified as light." in describe_frame(r)


def test_false_alarm_sentence_on_sunny(perfect_report):
    r = dataclasses.replace(perfect_report, far_direction=Direction.SW,
                            raw_level_far=RainfallLevel.SUNNY, far_level=RainfallLevel.MODERATE)
    assert "In the southwest, the sunny area is false alarmed as moderate." in describe_frame(r)


def test_high_value_sentence(perfect_report):
    r = dataclasses.replace(perfect_report, hv_mismatch_type=MismatchType.OVER_PREDICT,
                            hv_mismatch_direction=Direction.SE)
    assert "In the southeast, the prediction over-predicts high values." in describe_frame(r)


def test_perfect_report_text(perfect_report):
    text = describe_frame(perfect_report)
    assert text.count("Great") == 4
    assert "In the" not in text
    assert describe_frame(perfect_report) == text


def test_each_sentence_names_one_attribute(perfect_report):
    attrs = [a for a, _ in frame_sentences(perfect_report)]
    assert len(attrs) == len(set(attrs))


def _seq_report():
    gt = canonical_blob_sequence(2)
    return analyze_sequence(gt, gt)


def test_cumulative_sentence():
    r = dataclasses.replace(_seq_report(), cumulative_difference=CumulativeDifference.UNDERESTIMATE,
                            cumulative_mismatch_direction=Direction.W)
    assert "In the west, the cumulate precipitation is underestimated." in describe_sequence(r)


def test_sequence_labels():
    r = _seq_report()
    plain = describe_sequence(r)
    assert "Move direction" not in plain
    labelled = describe_sequence(r, {"move_direction": "northeast"})
    assert labelled.startswith(plain) and "northeast" in labelled
    with pytest.raises(LabelValidationError, match="move_direction"):
        describe_sequence(r, {"wind_speed": "fast"})


def test_load_labels(tmp_path):
    p = tmp_path / "labels.json"
    p.write_text(json.dumps({k: f"value {i}" for i, k in enumerate(HUMAN_LABEL_KEYS)}))
    assert len(load_labels(p)) == 17
    p.write_text("[1, 2]")
    with pytest.raises(LabelValidationError):
        load_labels(p)


class _Stub(BaseHTTPRequestHandler):
    mode = "canned"
    seen: list = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        _Stub.seen.append((dict(self.headers), body))
        if _Stub.mode == "error":
            self.send_response(500)
            self.end_headers()
            return
        if _Stub.mode == "echo":
            content = body["messages"][-1]["content"]
        elif _Stub.mode == "garbage":
            content = None
        else:
            content = "Polished report."
        payload = {"choices": [{"message": {"role": "assistant", "content": content}}]}
        if _Stub.mode == "garbage":
            payload = {"unexpected": True}
        data = json.dumps(payload).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    server = HTTPServer(("127.0.0.1", 0), _Stub)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _Stub.seen.clear()
    yield f"http://127.0.0.1:{server.server_address[1]}/v1/chat/completions"
    server.shutdown()
    server.server_close()


@pytest.mark.parametrize("mode, expected, warned", [
    ("canned", "Polished report.", False),
    ("echo", "Original text.", False),
    ("error", "Original text.", True),
    ("garbage", "Original text.", True),
])
def test_polish_against_stub(stub_server, mode, expected, warned):
    _Stub.mode = mode
    res = polish("Original text.", PolishConfig(stub_server, "m", key="k", timeout=5),
                 {"miss": "Great"})
    assert res.text == expected
    assert (res.warning is not None) is warned
    headers, body = _Stub.seen[-1]
    assert headers["Authorization"] == "Bearer k"
    assert body["model"] == "m"
    assert "correct potential inconsistencies" in body["messages"][0]["content"]


def test_polish_unreachable_and_unconfigured():
    res = polish("Text.", PolishConfig("http://127.0.0.1:9/none", "m", timeout=0.5))
    assert res.text == "Text." and res.warning
    assert polish("Text.", None).text == "Text."


def test_polish_config_from_env():
    assert PolishConfig.from_env({}) is None
    cfg = PolishConfig.from_env({"RADARQA_POLISH_URL": "http://x", "RADARQA_POLISH_TIMEOUT": "2"},
                                model="other")
    assert cfg == PolishConfig("http://x", "other", "", 2.0)


def test_frame_description_is_pure():
    rng = np.random.default_rng(2)
    a, b = (RadarFrame(x) for x in rng.integers(0, 255, (2, 12, 12)))
    assert describe_frame(analyze_frame(a, b)) == describe_frame(analyze_frame(a, b))
    s = RadarSequence((a, b))
    assert describe_sequence(analyze_sequence(s, s)) == describe_sequence(analyze_sequence(s, s))
