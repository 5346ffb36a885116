import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from radarqa.classical import SSIM_C1, SSIM_C2, categorical_scores, ssim
from radarqa.core import ContingencyTable, FrameValueError, RadarSequence, RadarFrame
from radarqa.frame_metrics import far_rate, miss_rate
from radarqa.ingest import Blur, DegradationSpec, canonical_blob_sequence, degrade


def test_fixture_scores():
    s = categorical_scores(ContingencyTable(6, 2, 2, 6))
    assert s["csi"] == pytest.approx(0.6, abs=1e-12)
    assert s["pod"] == 0.75
    assert s["far"] == 0.25
    assert s["bias"] == 1.0
    assert s["acc"] == 0.75
    # H_r = 8 * 8 / 16 = 4, ETS = (6 - 4) / (10 - 4)
    assert s["ets"] == pytest.approx(1 / 3, abs=1e-12)


def test_perfect_and_empty():
    s = categorical_scores(ContingencyTable(5, 0, 0, 11))
    assert (s["csi"], s["pod"], s["acc"], s["far"], s["bias"]) == (1, 1, 1, 0, 1)
    e = categorical_scores(ContingencyTable(0, 0, 0, 9))
    assert e["csi"] is e["pod"] is e["far"] is e["bias"] is None
    assert e["acc"] == 1.0


def _tables(max_n):
    for n in range(1, max_n + 1):
        for h in range(n + 1):
            for m in range(n - h + 1):
                for f in range(n - h - m + 1):
                    yield ContingencyTable(h, m, f, n - h - m - f)


def test_ets_not_above_csi_exhaustive():
    violations = 0
    checked = 0
    for t in _tables(12):
        s = categorical_scores(t)
        if s["ets"] is not None and s["csi"] is not None:
            checked += 1
            violations += s["ets"] > s["csi"] + 1e-15
    assert checked > 1000 and violations == 0


def test_pod_and_far_agree_with_rates():
    for t in _tables(8):
        s = categorical_scores(t)
        if s["pod"] is not None:
            assert s["pod"] + miss_rate(t) == pytest.approx(1.0, abs=1e-15)
        if s["far"] is not None:
            assert s["far"] == far_rate(t)


def _ssim_loop(x, y):
    # Direct per-window evaluation with explicit sample statistics.
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    vals = []
    for i in range(x.shape[0] - 7):
        for j in range(x.shape[1] - 7):
            a = x[i:i + 8, j:j + 8].ravel()
            b = y[i:i + 8, j:j + 8].ravel()
            ma, mb = a.mean(), b.mean()
            va = ((a - ma) ** 2).sum() / 63
            vb = ((b - mb) ** 2).sum() / 63
            cab = ((a - ma) * (b - mb)).sum() / 63
            vals.append(((2 * ma * mb + SSIM_C1) * (2 * cab + SSIM_C2))
                        / ((ma ** 2 + mb ** 2 + SSIM_C1) * (va + vb + SSIM_C2)))
    return float(np.mean(vals))


def test_ssim_examples():
    blob = canonical_blob_sequence(1)
    g = blob[0]
    assert ssim(g, g) == pytest.approx(1.0, abs=1e-12)
    c = np.full((10, 10), 80)
    assert ssim(c, c) == pytest.approx(1.0, abs=1e-12)
    b1 = degrade(blob, DegradationSpec((Blur(1),)))[0]
    b3 = degrade(blob, DegradationSpec((Blur(3),)))[0]
    s1, s3 = ssim(g, b1), ssim(g, b3)
    assert 0 < s3 < s1 < 1
    with pytest.raises(FrameValueError):
        ssim(np.zeros((7, 9)), np.zeros((7, 9)))
    with pytest.raises(FrameValueError):
        ssim(np.zeros((9, 9)), np.zeros((9, 10)))


@settings(max_examples=20, deadline=None)
@given(arrays(np.uint8, (11, 12), elements=st.integers(0, 254)),
       arrays(np.uint8, (11, 12), elements=st.integers(0, 254)))
def test_ssim_matches_loop_and_is_symmetric(a, b):
    assert ssim(a, b) == pytest.approx(_ssim_loop(a, b), abs=1e-12)
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-15)
    assert -1.0 <= ssim(a, b) <= 1.0
