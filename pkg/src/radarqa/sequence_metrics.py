"""Sequence-level attributes: high-value retain and cumulative precipitation."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from radarqa.config import RunConfig
from radarqa.core import (
    HIGH_VALUE_SCALE,
    Direction,
    FrameValueError,
    InvariantError,
    PerformanceLevel,
    RadarSequence,
    grade,
    sector_index_map,
    sector_sums,
)
from radarqa.frame_metrics import (
    FrameAttributeReport,
    MismatchType,
    analyze_frame,
    dominant_sector,
    high_value_mismatch,
    relative_error_score,
)


class CumulativeDifference(Enum):
    OVERESTIMATE = "Overestimate"
    UNDERESTIMATE = "Underestimate"
    BALANCED = "Balanced"


def _check_pair(pred: RadarSequence, gt: RadarSequence) -> None:
    if len(pred) != len(gt):
        raise FrameValueError(f"sequence length mismatch: prediction {len(pred)}, ground truth {len(gt)}")
    if pred.shape != gt.shape:
        raise FrameValueError(f"frame shape mismatch: prediction {pred.shape}, ground truth {gt.shape}")


def high_value_retain(
    pred: RadarSequence,
    gt: RadarSequence,
    hv_threshold: int = 219,
    scale=None,
) -> tuple[float, PerformanceLevel]:
    """Mean per-frame high-value mismatch score, graded."""
    _check_pair(pred, gt)
    scores = [high_value_mismatch(p, g, hv_threshold).score for p, g in zip(pred, gt)]
    score = sum(scores) / len(scores)
    return score, grade(score, scale or HIGH_VALUE_SCALE)


@dataclass(frozen=True)
class CumulativePrecipitation:
    score: float
    difference: CumulativeDifference
    total_gt: float
    total_pred: float
    sector_differences: tuple[float, ...]
    """Per-sector (forecast - observed) mass as a fraction of the observed total."""

    @property
    def direction(self) -> Direction | None:
        return dominant_sector(self.sector_differences)


def cumulative_precipitation(
    pred: RadarSequence,
    gt: RadarSequence,
    precipitating_only: bool = False,
    threshold: int = 16,
) -> CumulativePrecipitation:
    _check_pair(pred, gt)
    sectors = sector_index_map(*gt.shape)
    sec_gt = np.zeros(9)
    sec_pred = np.zeros(9)
    for p, g in zip(pred, gt):
        pv = p.values.astype(np.int64)
        gv = g.values.astype(np.int64)
        if precipitating_only:
            pv = np.where(pv > threshold, pv, 0)
            gv = np.where(gv > threshold, gv, 0)
        sec_pred += sector_sums(pv, sectors)
        sec_gt += sector_sums(gv, sectors)
    total_gt, total_pred = float(sec_gt.sum()), float(sec_pred.sum())
    if total_pred > total_gt:
        diff = CumulativeDifference.OVERESTIMATE
    elif total_pred < total_gt:
        diff = CumulativeDifference.UNDERESTIMATE
    else:
        diff = CumulativeDifference.BALANCED
    norm = total_gt if total_gt > 0 else max(total_pred, 1.0)
    return CumulativePrecipitation(
        score=relative_error_score(total_gt, total_pred),
        difference=diff,
        total_gt=total_gt,
        total_pred=total_pred,
        sector_differences=tuple(float(x) for x in (sec_pred - sec_gt) / norm),
    )


def hv_sequence_attribution(
    per_frame_differences: Sequence[Sequence[int]],
    gt_high_value_total: int | None = None,
    min_fraction: float = 0.05,
) -> tuple[MismatchType, Direction | None]:
    """Aggregate per-frame, per-sector high-value count differences (forecast minus observed).

    When ``gt_high_value_total`` is given, the dominant sector is reported only
    if its summed absolute difference reaches ``min_fraction`` of that total.
    """
    diffs = np.zeros(9, dtype=np.int64)
    for d in per_frame_differences:
        if len(d) != 9:
            raise ValueError("each frame needs nine sector differences")
        diffs += np.asarray(d, dtype=np.int64)
    total = int(diffs.sum())
    kind = MismatchType.from_counts(0, total)
    direction = dominant_sector(diffs)
    if direction is not None and gt_high_value_total is not None:
        if abs(diffs[direction.value]) < min_fraction * gt_high_value_total:
            direction = None
    return kind, direction


@dataclass(frozen=True)
class SequenceAttributeReport:
    high_value_retain_score: float
    high_value_retain_performance: PerformanceLevel
    hv_mismatch_type_seq: MismatchType
    hv_mismatch_direction_seq: Direction | None
    cumulative_score: float
    cumulative_performance: PerformanceLevel
    cumulative_difference: CumulativeDifference
    cumulative_mismatch_direction: Direction | None
    per_frame: tuple[FrameAttributeReport, ...]
    cumulative_total_gt: float
    cumulative_total_pred: float

    @property
    def performances(self) -> dict[str, PerformanceLevel]:
        return {
            "cumulative_precipitation": self.cumulative_performance,
            "high_value_retain": self.high_value_retain_performance,
        }

    def to_dict(self, include_frames: bool = True) -> dict:
        def dr(x):
            return None if x is None else x.label

        out = {
            "high_value_retain_score": self.high_value_retain_score,
            "high_value_retain_performance": self.high_value_retain_performance.label,
            "hv_mismatch_type_seq": self.hv_mismatch_type_seq.value,
            "hv_mismatch_direction_seq": dr(self.hv_mismatch_direction_seq),
            "cumulative_score": self.cumulative_score,
            "cumulative_performance": self.cumulative_performance.label,
            "cumulative_difference": self.cumulative_difference.value,
            "cumulative_mismatch_direction": dr(self.cumulative_mismatch_direction),
            "cumulative_total_gt": self.cumulative_total_gt,
            "cumulative_total_pred": self.cumulative_total_pred,
        }
        if include_frames:
            out["per_frame"] = [r.to_dict() for r in self.per_frame]
        return out


def analyze_sequence(pred: RadarSequence, gt: RadarSequence, config: RunConfig | None = None) -> SequenceAttributeReport:
    """Frame reports for every pair plus the sequence-level aggregates.

    With ``config.workers > 1`` the per-frame analyses run on a thread pool;
    results keep input order.
    """
    cfg = config or RunConfig()
    _check_pair(pred, gt)
    pairs = list(zip(pred, gt))
    if cfg.workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            frames = tuple(pool.map(lambda pg: analyze_frame(pg[0], pg[1], cfg), pairs))
    else:
        frames = tuple(analyze_frame(p, g, cfg) for p, g in pairs)

    retain = sum(r.high_value_score for r in frames) / len(frames)
    gt_hv_total = sum(int((g.values > cfg.high_value_threshold).sum()) for g in gt)
    hv_type, hv_dir = hv_sequence_attribution(
        [r.hv_sector_differences for r in frames], gt_hv_total, cfg.sequence_direction_fraction
    )
    cum = cumulative_precipitation(pred, gt, cfg.cumulative_precipitating_only, cfg.precipitation_threshold)
    if len(frames) != len(pairs):
        raise InvariantError("per-frame report count differs from sequence length")

    return SequenceAttributeReport(
        high_value_retain_score=retain,
        high_value_retain_performance=grade(retain, cfg.high_value_scale),
        hv_mismatch_type_seq=hv_type,
        hv_mismatch_direction_seq=hv_dir,
        cumulative_score=cum.score,
        cumulative_performance=grade(cum.score, cfg.cumulative_scale),
        cumulative_difference=cum.difference,
        cumulative_mismatch_direction=cum.direction,
        per_frame=frames,
        cumulative_total_gt=cum.total_gt,
        cumulative_total_pred=cum.total_pred,
    )
