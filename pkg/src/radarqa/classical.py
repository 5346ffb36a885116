"""Standard categorical verification scores and SSIM, for baseline comparison."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from radarqa.core import MAX_CODE, ContingencyTable, FrameValueError, RadarFrame

SCORE_NAMES = ("csi", "pod", "far", "bias", "acc", "ets")

SSIM_WINDOW = 8
SSIM_C1 = (0.01 * MAX_CODE) ** 2
SSIM_C2 = (0.03 * MAX_CODE) ** 2


def _ratio(num: float, den: float) -> float | None:
    return num / den if den else None


def categorical_scores(t: ContingencyTable) -> dict[str, float | None]:
    """CSI, POD, FAR, frequency bias, accuracy and ETS of a 2x2 table.

    A score whose denominator vanishes is ``None`` (undefined) rather than a number.
    """
    h, m, f, c = t.hits, t.misses, t.false_alarms, t.correct_negatives
    n = h + m + f + c
    hits_random = (h + m) * (h + f) / n if n else 0.0
    return {
        "csi": _ratio(h, h + m + f),
        "pod": _ratio(h, h + m),
        "far": _ratio(f, h + f),
        "bias": _ratio(h + f, h + m),
        "acc": _ratio(h + c, n),
        "ets": _ratio(h - hits_random, h + m + f - hits_random) if n else None,
    }


def ssim(pred, gt) -> float:
    """Mean SSIM over all 8x8 windows (stride 1, uniform weights, sample covariance).

    Stabilizers are scaled to the 0..254 code range.
    """
    x = (pred.values if isinstance(pred, RadarFrame) else np.asarray(pred)).astype(np.float64)
    y = (gt.values if isinstance(gt, RadarFrame) else np.asarray(gt)).astype(np.float64)
    if x.shape != y.shape:
        raise FrameValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    if x.ndim != 2 or min(x.shape) < SSIM_WINDOW:
        raise FrameValueError(f"SSIM needs frames of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {x.shape}")
    wx = sliding_window_view(x, (SSIM_WINDOW, SSIM_WINDOW))
    wy = sliding_window_view(y, (SSIM_WINDOW, SSIM_WINDOW))
    n = SSIM_WINDOW * SSIM_WINDOW
    mx = wx.mean(axis=(-1, -2))
    my = wy.mean(axis=(-1, -2))
    dx = wx - mx[..., None, None]
    dy = wy - my[..., None, None]
    vx = (dx * dx).sum(axis=(-1, -2)) / (n - 1)
    vy = (dy * dy).sum(axis=(-1, -2)) / (n - 1)
    cxy = (dx * dy).sum(axis=(-1, -2)) / (n - 1)
    num = (2 * mx * my + SSIM_C1) * (2 * cxy + SSIM_C2)
    den = (mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2)
    return float((num / den).mean())
