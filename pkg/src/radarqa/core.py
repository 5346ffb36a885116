"""Domain types, level discretization and threshold grading.

Everything here is immutable and side-effect free. Frames hold VIL intensity
codes in ``[0, 254]`` as a read-only ``uint8`` array of shape ``(height, width)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Iterable, Sequence

import numpy as np

MAX_CODE = 254
MIN_SIDE = 3

DEFAULT_LEVEL_BOUNDARIES: tuple[int, ...] = (16, 74, 133, 160, 181, 219)
"""Lower bounds (inclusive) of Light .. Extreme."""

DEFAULT_LEVEL_WEIGHTS: tuple[float, ...] = (1.0, 1.5, 2.5, 5.0, 10.0, 20.0)
"""Importance weights of Light .. Extreme used to pick the raw rainfall level."""

PRECIPITATION_THRESHOLD = 16
HIGH_VALUE_THRESHOLD = 219
CLASSICAL_THRESHOLD = 74


class FrameValueError(ValueError):
    """Raised when frame data violates the intensity-grid invariants."""


class InvariantError(RuntimeError):
    """Raised when an internally computed quantity breaks a documented invariant."""


class RainfallLevel(IntEnum):
    SUNNY = 0
    LIGHT = 1
    MODERATE = 2
    HEAVY = 3
    INTENSE = 4
    SEVERE = 5
    EXTREME = 6

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @property
    def word(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, text: str) -> "RainfallLevel":
        return cls[text.strip().upper()]


class PerformanceLevel(IntEnum):
    """Four-grade scale; larger ordinal is better."""

    POOR = 0
    FAIR = 1
    GOOD = 2
    GREAT = 3

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @classmethod
    def parse(cls, text: str) -> "PerformanceLevel":
        """Case-insensitive lookup of ``"Great"``/``"good"``/... ."""
        return cls[text.strip().upper()]


_COMPASS = (
    "northwest", "north", "northeast",
    "west", "center", "east",
    "southwest", "south", "southeast",
)


class Direction(Enum):
    """Cells of the 3x3 partition in row-major order, north at the top."""

    NW = 0
    N = 1
    NE = 2
    W = 3
    CENTER = 4
    E = 5
    SW = 6
    S = 7
    SE = 8

    @property
    def word(self) -> str:
        return _COMPASS[self.value]

    @property
    def label(self) -> str:
        return "Center" if self is Direction.CENTER else self.name

    @classmethod
    def parse(cls, text: str) -> "Direction":
        key = text.strip().upper()
        if key in _COMPASS_UPPER:
            return cls(_COMPASS_UPPER.index(key))
        return cls[key]


_COMPASS_UPPER = tuple(w.upper() for w in _COMPASS)


class Orientation(Enum):
    LOWER_IS_BETTER = "lower"
    HIGHER_IS_BETTER = "higher"


def _as_code_array(values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise FrameValueError(f"frame must be 2-D, got shape {arr.shape}")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.isfinite(arr)) or not np.all(arr == np.round(arr)):
            raise FrameValueError("frame values must be integer intensity codes")
    if arr.size and (arr.min() < 0 or arr.max() > MAX_CODE):
        raise FrameValueError(
            f"frame values must lie in [0, {MAX_CODE}], got [{arr.min()}, {arr.max()}]"
        )
    return arr.astype(np.uint8)


@dataclass(frozen=True, eq=False)
class RadarFrame:
    """A single VIL intensity grid.

    Args:
        values: 2-D array-like of integer codes, row-major with row 0 at the north edge.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = _as_code_array(self.values)
        h, w = arr.shape
        if h < MIN_SIDE or w < MIN_SIDE:
            raise FrameValueError(f"frame must be at least {MIN_SIDE}x{MIN_SIDE}, got {w}x{h}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_flat(cls, width: int, height: int, values: Sequence[int]) -> "RadarFrame":
        flat = np.asarray(values)
        if flat.size != width * height:
            raise FrameValueError(
                f"expected {width * height} values for {width}x{height}, got {flat.size}"
            )
        return cls(flat.reshape(height, width))

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    @property
    def height(self) -> int:
        return int(self.values.shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RadarFrame):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.values, other.values))

    def __hash__(self) -> int:
        return hash((self.shape, self.values.tobytes()))

    def __repr__(self) -> str:
        return f"RadarFrame({self.width}x{self.height}, max={int(self.values.max())})"


@dataclass(frozen=True)
class RadarSequence:
    frames: tuple[RadarFrame, ...]
    frame_interval_minutes: float = 5.0

    def __post_init__(self) -> None:
        frames = tuple(self.frames)
        if not frames:
            raise FrameValueError("a sequence needs at least one frame")
        shape = frames[0].shape
        for i, f in enumerate(frames):
            if not isinstance(f, RadarFrame):
                raise TypeError(f"frame {i} is not a RadarFrame")
            if f.shape != shape:
                raise FrameValueError(f"frame {i} has shape {f.shape}, expected {shape}")
        if not self.frame_interval_minutes > 0:
            raise FrameValueError("frame_interval_minutes must be positive")
        object.__setattr__(self, "frames", frames)

    @classmethod
    def from_array(cls, stack, frame_interval_minutes: float = 5.0) -> "RadarSequence":
        arr = np.asarray(stack)
        if arr.ndim != 3:
            raise FrameValueError(f"expected a (T, H, W) stack, got shape {arr.shape}")
        return cls(tuple(RadarFrame(a) for a in arr), frame_interval_minutes)

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    def __getitem__(self, i: int) -> RadarFrame:
        return self.frames[i]

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames[0].shape

    def to_array(self) -> np.ndarray:
        return np.stack([f.values for f in self.frames])


@dataclass(frozen=True)
class ContingencyTable:
    hits: int
    misses: int
    false_alarms: int
    correct_negatives: int

    def __post_init__(self) -> None:
        if min(self.hits, self.misses, self.false_alarms, self.correct_negatives) < 0:
            raise ValueError(f"contingency counts must be non-negative: {self}")

    @property
    def total(self) -> int:
        return self.hits + self.misses + self.false_alarms + self.correct_negatives


@dataclass(frozen=True)
class GradingScale:
    """Three cut points turning a score into a PerformanceLevel."""

    thresholds: tuple[float, float, float]
    orientation: Orientation

    def __post_init__(self) -> None:
        t = tuple(float(x) for x in self.thresholds)
        if len(t) != 3 or not (t[0] < t[1] < t[2]):
            raise ValueError(f"grading thresholds must be a strictly increasing triple, got {t}")
        object.__setattr__(self, "thresholds", t)

    @classmethod
    def lower(cls, *t: float) -> "GradingScale":
        return cls(tuple(t), Orientation.LOWER_IS_BETTER)

    @classmethod
    def higher(cls, *t: float) -> "GradingScale":
        return cls(tuple(t), Orientation.HIGHER_IS_BETTER)


FAR_SCALE = GradingScale.lower(0.1, 0.2, 0.3)
MISS_SCALE = GradingScale.lower(0.1, 0.2, 0.4)
SHARPNESS_SCALE = GradingScale.higher(0.5, 0.7, 0.9)
HIGH_VALUE_SCALE = GradingScale.higher(0.3, 0.6, 0.8)
CUMULATIVE_SCALE = GradingScale.higher(0.93, 0.97, 0.99)


def validate_boundaries(boundaries: Iterable[int]) -> tuple[int, ...]:
    b = tuple(int(x) for x in boundaries)
    if len(b) != 6:
        raise ValueError(f"expected six level boundaries, got {len(b)}")
    if any(x < 1 or x > MAX_CODE for x in b):
        raise ValueError(f"level boundaries must lie in [1, {MAX_CODE}], got {b}")
    if any(a >= c for a, c in zip(b, b[1:])):
        raise ValueError(f"level boundaries must be strictly increasing, got {b}")
    return b


def _values(frame) -> np.ndarray:
    return frame.values if isinstance(frame, RadarFrame) else np.asarray(frame)


def discretize(frame, boundaries: Sequence[int] = DEFAULT_LEVEL_BOUNDARIES) -> np.ndarray:
    """Map each pixel to a RainfallLevel ordinal (``int8`` grid of 0..6).

    A pixel is at level ``k`` when it reaches ``boundaries[k-1]`` but not
    ``boundaries[k]``; anything below the first boundary is Sunny.
    """
    b = np.asarray(validate_boundaries(boundaries))
    return np.searchsorted(b, _values(frame), side="right").astype(np.int8)


def level_of(value: int, boundaries: Sequence[int] = DEFAULT_LEVEL_BOUNDARIES) -> RainfallLevel:
    b = validate_boundaries(boundaries)
    return RainfallLevel(int(np.searchsorted(np.asarray(b), value, side="right")))


def grade(score: float, scale: GradingScale) -> PerformanceLevel:
    """Grade ``score`` on ``scale``; a score exactly on a cut earns the better grade."""
    if score is None or math.isnan(score):
        raise ValueError("cannot grade a NaN score")
    t1, t2, t3 = scale.thresholds
    if scale.orientation is Orientation.LOWER_IS_BETTER:
        if score <= t1:
            return PerformanceLevel.GREAT
        if score <= t2:
            return PerformanceLevel.GOOD
        if score <= t3:
            return PerformanceLevel.FAIR
        return PerformanceLevel.POOR
    if score >= t3:
        return PerformanceLevel.GREAT
    if score >= t2:
        return PerformanceLevel.GOOD
    if score >= t1:
        return PerformanceLevel.FAIR
    return PerformanceLevel.POOR


def sector_of(x: int, y: int, width: int, height: int) -> Direction:
    if not (0 <= x < width and 0 <= y < height):
        raise ValueError(f"pixel ({x}, {y}) outside {width}x{height} frame")
    col = min(2, (3 * x) // width)
    row = min(2, (3 * y) // height)
    return Direction(row * 3 + col)


def sector_index_map(height: int, width: int) -> np.ndarray:
    """Sector ordinal (0..8) of every pixel, same banding as :func:`sector_of`."""
    rows = np.minimum(2, (3 * np.arange(height)) // height)
    cols = np.minimum(2, (3 * np.arange(width)) // width)
    return (rows[:, None] * 3 + cols[None, :]).astype(np.int8)


def sector_sums(values: np.ndarray, sectors: np.ndarray) -> np.ndarray:
    """Sum ``values`` within each of the nine sectors."""
    return np.bincount(sectors.ravel(), weights=np.asarray(values, dtype=np.float64).ravel(),
                       minlength=9)


def sector_counts(mask: np.ndarray, sectors: np.ndarray) -> np.ndarray:
    """Number of true pixels of ``mask`` in each of the nine sectors."""
    return np.bincount(sectors[np.asarray(mask, dtype=bool)], minlength=9).astype(np.int64)
