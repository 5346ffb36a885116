"""Frame-level attributes: miss, false alarm, sharpness, high-value match.

Error attribution works on discretized levels. A pixel is a *miss* at its
observed level when the forecast level there is lighter, and a *false alarm*
when the forecast level is heavier. The raw level is the observed level with
the largest weighted error count; the error level is the most frequent
forecast level at those pixels; the direction is picked from the 3x3 sectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from radarqa.config import Comparator, RunConfig
from radarqa.core import (
    DEFAULT_LEVEL_BOUNDARIES,
    ContingencyTable,
    Direction,
    FrameValueError,
    InvariantError,
    PerformanceLevel,
    RadarFrame,
    RainfallLevel,
    discretize,
    grade,
    sector_counts,
    sector_index_map,
    sector_sums,
)


class MismatchType(Enum):
    OVER_PREDICT = "OverPredict"
    UNDER_PREDICT = "UnderPredict"
    BALANCED = "Balanced"

    @classmethod
    def from_counts(cls, n_gt: float, n_pred: float) -> "MismatchType":
        if n_pred > n_gt:
            return cls.OVER_PREDICT
        if n_pred < n_gt:
            return cls.UNDER_PREDICT
        return cls.BALANCED


def _arr(frame) -> np.ndarray:
    return frame.values if isinstance(frame, RadarFrame) else np.asarray(frame)


def _same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise FrameValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def binarize(frame, threshold: int) -> np.ndarray:
    """Precipitation mask: ``value > threshold`` (strict)."""
    return _arr(frame) > threshold


def contingency(gt_mask, pred_mask) -> ContingencyTable:
    g = np.asarray(gt_mask, dtype=bool)
    p = np.asarray(pred_mask, dtype=bool)
    _same_shape(g, p)
    hits = int(np.count_nonzero(g & p))
    misses = int(np.count_nonzero(g & ~p))
    false_alarms = int(np.count_nonzero(~g & p))
    table = ContingencyTable(hits, misses, false_alarms, g.size - hits - misses - false_alarms)
    if table.total != g.size:
        raise InvariantError(f"contingency counts {table} do not sum to {g.size}")
    return table


def miss_rate(t: ContingencyTable) -> float:
    """``M / (H + M)``; 0 when nothing was observed."""
    denom = t.hits + t.misses
    return t.misses / denom if denom else 0.0


def far_rate(t: ContingencyTable) -> float:
    """``F / (H + F)``; 0 when nothing was forecast."""
    denom = t.hits + t.false_alarms
    return t.false_alarms / denom if denom else 0.0


def raw_rainfall_level(
    gt_levels,
    error_mask,
    weights: Sequence[float],
    sunny_weight: float | None = None,
) -> RainfallLevel | None:
    """Observed level carrying the largest weighted count of error pixels.

    ``weights`` apply to Light .. Extreme. Sunny error pixels are ignored
    unless ``sunny_weight`` is given. Ties go to the lighter level.
    """
    if len(weights) != 6:
        raise ValueError(f"expected six weights, got {len(weights)}")
    g = np.asarray(gt_levels)
    e = np.asarray(error_mask, dtype=bool)
    _same_shape(g, e)
    counts = np.bincount(g[e].astype(np.int64), minlength=7)[:7]
    w = np.array([0.0 if sunny_weight is None else sunny_weight, *weights])
    weighted = counts * w
    if not np.any(weighted > 0):
        return None
    return RainfallLevel(int(np.argmax(weighted)))


def error_rainfall_level(
    pred_levels,
    locations,
    raw: RainfallLevel | None,
    comparator: Comparator,
) -> RainfallLevel | None:
    """Most frequent forecast level at ``locations`` on the comparator's side of ``raw``."""
    if raw is None:
        return None
    p = np.asarray(pred_levels)
    loc = np.asarray(locations, dtype=bool)
    _same_shape(p, loc)
    hist = np.bincount(p[loc].astype(np.int64), minlength=7)[:7]
    best, best_count = None, 0
    for level in range(7):
        if comparator.admits(level, int(raw)) and hist[level] > best_count:
            best, best_count = level, hist[level]
    return None if best is None else RainfallLevel(best)


def error_direction(per_sector_rates: Sequence[float], per_sector_raw_counts: Sequence[int]) -> Direction | None:
    """First sector by descending rate whose raw count is among the two largest."""
    rates = list(per_sector_rates)
    counts = list(per_sector_raw_counts)
    if len(rates) != 9 or len(counts) != 9:
        raise ValueError("error_direction expects nine rates and nine counts")
    if max(counts) <= 0:
        return None
    second = sorted(counts, reverse=True)[1]
    cutoff = max(second, 1)
    for i in sorted(range(9), key=lambda i: -rates[i]):
        if counts[i] >= cutoff:
            return Direction(i)
    raise InvariantError("no sector passed the top-two count filter")


def sobel_magnitude(frame) -> np.ndarray:
    """Gradient magnitude of the 3x3 Sobel operator over interior pixels."""
    a = _arr(frame).astype(np.float64)
    if a.ndim != 2 or min(a.shape) < 3:
        raise FrameValueError(f"Sobel needs a 2-D grid of at least 3x3, got {a.shape}")
    gx = (a[:-2, 2:] + 2 * a[1:-1, 2:] + a[2:, 2:]) - (a[:-2, :-2] + 2 * a[1:-1, :-2] + a[2:, :-2])
    gy = (a[2:, :-2] + 2 * a[2:, 1:-1] + a[2:, 2:]) - (a[:-2, :-2] + 2 * a[:-2, 1:-1] + a[:-2, 2:])
    return np.hypot(gx, gy)


def sobel_mean(frame) -> float:
    return float(sobel_magnitude(frame).mean())


def sharpness_ratio_score(s_pred: float, s_gt: float) -> float:
    if s_gt == 0:
        return 1.0 if s_pred == 0 else 0.0
    r = abs(s_pred / s_gt)
    d = 2.0 - r if r > 1 else r
    return max(0.0, d)


def sharpness_score(pred, gt) -> float:
    p, g = _arr(pred), _arr(gt)
    _same_shape(p, g)
    return sharpness_ratio_score(sobel_mean(p), sobel_mean(g))


def relative_error_score(reference: float, estimate: float) -> float:
    """``min(1, max(0, 1 - |(reference - estimate) / reference|))`` with empty-reference conventions."""
    if reference == 0:
        return 1.0 if estimate == 0 else 0.0
    e = abs((reference - estimate) / reference)
    return min(1.0, max(0.0, 1.0 - e))


def dominant_sector(differences: Sequence[float]) -> Direction | None:
    """Sector with the largest absolute difference; row-major order breaks ties."""
    d = np.abs(np.asarray(differences, dtype=np.float64))
    if not np.any(d > 0):
        return None
    return Direction(int(np.argmax(d)))


@dataclass(frozen=True)
class HighValueMismatch:
    score: float
    type: MismatchType
    sector_differences: tuple[int, ...]
    n_gt: int
    n_pred: int

    @property
    def direction(self) -> Direction | None:
        return dominant_sector(self.sector_differences)


def high_value_mismatch(pred, gt, hv_threshold: int = 219) -> HighValueMismatch:
    """Compare counts of pixels above ``hv_threshold``; differences are forecast minus observed."""
    p, g = _arr(pred), _arr(gt)
    _same_shape(p, g)
    sectors = sector_index_map(*g.shape)
    gt_hv = g > hv_threshold
    pred_hv = p > hv_threshold
    n_gt, n_pred = int(gt_hv.sum()), int(pred_hv.sum())
    diffs = sector_counts(pred_hv, sectors) - sector_counts(gt_hv, sectors)
    return HighValueMismatch(
        score=relative_error_score(n_gt, n_pred),
        type=MismatchType.from_counts(n_gt, n_pred),
        sector_differences=tuple(int(x) for x in diffs),
        n_gt=n_gt,
        n_pred=n_pred,
    )


def max_rainfall_level(gt, boundaries: Sequence[int] = DEFAULT_LEVEL_BOUNDARIES) -> RainfallLevel:
    g = _arr(gt)
    return RainfallLevel(int(discretize(np.array([[g.max()]]), boundaries)[0, 0]))


def distribution(gt, threshold: int = 16) -> list[tuple[Direction, float]]:
    """Share of observed precipitation mass per sector, largest first; zero sectors omitted."""
    g = _arr(gt)
    mass = np.where(g > threshold, g, 0)
    sums = sector_sums(mass, sector_index_map(*g.shape))
    total = sums.sum()
    if total <= 0:
        return []
    order = sorted(range(9), key=lambda i: (-sums[i], i))
    return [(Direction(i), float(sums[i] / total)) for i in order if sums[i] > 0]


def _sector_rates(errors: np.ndarray, correct: np.ndarray) -> list[float]:
    total = errors + correct
    return [float(e / t) if t else 0.0 for e, t in zip(errors, total)]


@dataclass(frozen=True)
class ErrorAttribution:
    raw_level: RainfallLevel | None
    error_level: RainfallLevel | None
    direction: Direction | None


def _attribute(
    error_mask: np.ndarray,
    gt_levels: np.ndarray,
    pred_levels: np.ndarray,
    sector_rates: Sequence[float],
    sectors: np.ndarray,
    config: RunConfig,
    comparator: Comparator,
    sunny_weight: float | None,
) -> ErrorAttribution:
    raw = raw_rainfall_level(gt_levels, error_mask, config.weights, sunny_weight)
    if raw is None:
        return ErrorAttribution(None, None, None)
    locations = error_mask & (gt_levels == int(raw))
    level = error_rainfall_level(pred_levels, locations, raw, comparator)
    direction = error_direction(sector_rates, sector_counts(locations, sectors))
    return ErrorAttribution(raw, level, direction)


@dataclass(frozen=True)
class FrameAttributeReport:
    miss_rate: float
    far_rate: float
    sharpness_score: float
    high_value_score: float
    miss_performance: PerformanceLevel
    far_performance: PerformanceLevel
    sharpness_performance: PerformanceLevel
    high_value_performance: PerformanceLevel
    raw_level_miss: RainfallLevel | None
    miss_level: RainfallLevel | None
    miss_direction: Direction | None
    raw_level_far: RainfallLevel | None
    far_level: RainfallLevel | None
    far_direction: Direction | None
    hv_mismatch_type: MismatchType
    hv_mismatch_direction: Direction | None
    max_rainfall_level: RainfallLevel
    distribution: tuple[tuple[Direction, float], ...]
    table: ContingencyTable
    hv_sector_differences: tuple[int, ...]
    sobel_gt: float
    sobel_pred: float

    @property
    def performances(self) -> dict[str, PerformanceLevel]:
        """Grades under the frame-rating keys."""
        return {
            "miss": self.miss_performance,
            "false_alarm": self.far_performance,
            "sharpness": self.sharpness_performance,
            "high_value_match": self.high_value_performance,
        }

    def to_dict(self) -> dict:
        def lvl(x):
            return None if x is None else x.label

        def dr(x):
            return None if x is None else x.label

        t = self.table
        return {
            "miss_rate": self.miss_rate,
            "far_rate": self.far_rate,
            "sharpness_score": self.sharpness_score,
            "high_value_score": self.high_value_score,
            "miss_performance": self.miss_performance.label,
            "far_performance": self.far_performance.label,
            "sharpness_performance": self.sharpness_performance.label,
            "high_value_performance": self.high_value_performance.label,
            "raw_level_miss": lvl(self.raw_level_miss),
            "miss_level": lvl(self.miss_level),
            "miss_direction": dr(self.miss_direction),
            "raw_level_far": lvl(self.raw_level_far),
            "far_level": lvl(self.far_level),
            "far_direction": dr(self.far_direction),
            "hv_mismatch_type": self.hv_mismatch_type.value,
            "hv_mismatch_direction": dr(self.hv_mismatch_direction),
            "max_rainfall_level": self.max_rainfall_level.label,
            "distribution": [[d.label, f] for d, f in self.distribution],
            "contingency": {
                "hits": t.hits,
                "misses": t.misses,
                "false_alarms": t.false_alarms,
                "correct_negatives": t.correct_negatives,
            },
            "sobel_gt": self.sobel_gt,
            "sobel_pred": self.sobel_pred,
        }


def analyze_frame(pred, gt, config: RunConfig | None = None) -> FrameAttributeReport:
    """Compute every automated frame attribute of ``pred`` against ``gt``."""
    cfg = config or RunConfig()
    p, g = _arr(pred), _arr(gt)
    _same_shape(p, g)
    sectors = sector_index_map(*g.shape)

    gt_mask = binarize(g, cfg.precipitation_threshold)
    pred_mask = binarize(p, cfg.precipitation_threshold)
    table = contingency(gt_mask, pred_mask)
    mr, fr = miss_rate(table), far_rate(table)

    hits_s = sector_counts(gt_mask & pred_mask, sectors)
    miss_rates = _sector_rates(sector_counts(gt_mask & ~pred_mask, sectors), hits_s)
    far_rates = _sector_rates(sector_counts(~gt_mask & pred_mask, sectors), hits_s)

    gl = discretize(g, cfg.level_boundaries)
    pl = discretize(p, cfg.level_boundaries)
    miss = _attribute((gl >= 1) & (pl < gl), gl, pl, miss_rates, sectors, cfg,
                      cfg.miss_level_comparator, None)
    far = _attribute(pl > gl, gl, pl, far_rates, sectors, cfg,
                     cfg.far_level_comparator, cfg.sunny_weight)

    s_gt, s_pred = sobel_mean(g), sobel_mean(p)
    sharp = sharpness_ratio_score(s_pred, s_gt)
    hv = high_value_mismatch(p, g, cfg.high_value_threshold)

    return FrameAttributeReport(
        miss_rate=mr,
        far_rate=fr,
        sharpness_score=sharp,
        high_value_score=hv.score,
        miss_performance=grade(mr, cfg.miss_scale),
        far_performance=grade(fr, cfg.far_scale),
        sharpness_performance=grade(sharp, cfg.sharpness_scale),
        high_value_performance=grade(hv.score, cfg.high_value_scale),
        raw_level_miss=miss.raw_level,
        miss_level=miss.error_level,
        miss_direction=miss.direction,
        raw_level_far=far.raw_level,
        far_level=far.error_level,
        far_direction=far.direction,
        hv_mismatch_type=hv.type,
        hv_mismatch_direction=hv.direction,
        max_rainfall_level=max_rainfall_level(g, cfg.level_boundaries),
        distribution=tuple(distribution(g, cfg.precipitation_threshold)),
        table=table,
        hv_sector_differences=hv.sector_differences,
        sobel_gt=s_gt,
        sobel_pred=s_pred,
    )
