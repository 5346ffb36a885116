"""Run configuration shared by the metric modules and the command line."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from enum import Enum
from pathlib import Path

from radarqa.core import (
    CLASSICAL_THRESHOLD,
    CUMULATIVE_SCALE,
    DEFAULT_LEVEL_BOUNDARIES,
    DEFAULT_LEVEL_WEIGHTS,
    FAR_SCALE,
    HIGH_VALUE_SCALE,
    HIGH_VALUE_THRESHOLD,
    MAX_CODE,
    MISS_SCALE,
    PRECIPITATION_THRESHOLD,
    SHARPNESS_SCALE,
    GradingScale,
    Orientation,
    validate_boundaries,
)


class Comparator(Enum):
    """Which predicted levels count as an error level relative to the raw level."""

    LIGHTER_THAN = "lighter"
    HEAVIER_THAN = "heavier"

    def admits(self, level: int, raw: int) -> bool:
        return level < raw if self is Comparator.LIGHTER_THAN else level > raw


_SCALE_FIELDS = ("miss_scale", "far_scale", "sharpness_scale", "high_value_scale",
                 "cumulative_scale")


@dataclass(frozen=True)
class RunConfig:
    """All tunable constants of the annotation pipeline.

    The defaults reproduce the published procedure. ``sunny_weight`` weights
    Sunny observation pixels when choosing the raw level of false alarms,
    where the observation is usually dry. ``far_level_comparator`` defaults to
    HEAVIER_THAN because a false alarm forecasts more rain than observed.
    """

    precipitation_threshold: int = PRECIPITATION_THRESHOLD
    high_value_threshold: int = HIGH_VALUE_THRESHOLD
    classical_threshold: int = CLASSICAL_THRESHOLD
    level_boundaries: tuple[int, ...] = DEFAULT_LEVEL_BOUNDARIES
    miss_scale: GradingScale = MISS_SCALE
    far_scale: GradingScale = FAR_SCALE
    sharpness_scale: GradingScale = SHARPNESS_SCALE
    high_value_scale: GradingScale = HIGH_VALUE_SCALE
    cumulative_scale: GradingScale = CUMULATIVE_SCALE
    weights: tuple[float, ...] = DEFAULT_LEVEL_WEIGHTS
    sunny_weight: float = 1.0
    far_level_comparator: Comparator = Comparator.HEAVIER_THAN
    miss_level_comparator: Comparator = Comparator.LIGHTER_THAN
    sequence_direction_fraction: float = 0.05
    cumulative_precipitating_only: bool = False
    workers: int = 1
    output_format: str = "json"

    def __post_init__(self) -> None:
        for name in ("precipitation_threshold", "high_value_threshold", "classical_threshold"):
            v = getattr(self, name)
            if not 0 <= v <= MAX_CODE:
                raise ValueError(f"{name} must lie in [0, {MAX_CODE}], got {v}")
        object.__setattr__(self, "level_boundaries", validate_boundaries(self.level_boundaries))
        w = tuple(float(x) for x in self.weights)
        if len(w) != 6 or any(x <= 0 for x in w):
            raise ValueError(f"weights must be six positive numbers, got {w}")
        object.__setattr__(self, "weights", w)
        if self.sunny_weight <= 0:
            raise ValueError("sunny_weight must be positive")
        if not 0 <= self.sequence_direction_fraction <= 1:
            raise ValueError("sequence_direction_fraction must lie in [0, 1]")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.output_format not in ("json", "text"):
            raise ValueError(f"unknown output format {self.output_format!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}; accepted: {sorted(known)}")
        kwargs = {}
        for key, value in data.items():
            if key in _SCALE_FIELDS:
                default: GradingScale = getattr(cls, key)
                thresholds = value["thresholds"] if isinstance(value, dict) else value
                orientation = default.orientation
                if isinstance(value, dict) and "orientation" in value:
                    orientation = Orientation(value["orientation"])
                kwargs[key] = GradingScale(tuple(thresholds), orientation)
            elif key in ("far_level_comparator", "miss_level_comparator"):
                kwargs[key] = Comparator(value)
            elif key in ("level_boundaries", "weights"):
                kwargs[key] = tuple(value)
            else:
                kwargs[key] = value
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)

    def with_overrides(self, **overrides) -> "RunConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, GradingScale):
                out[f.name] = {"thresholds": list(v.thresholds), "orientation": v.orientation.value}
            elif isinstance(v, Enum):
                out[f.name] = v.value
            elif isinstance(v, tuple):
                out[f.name] = list(v)
            else:
                out[f.name] = v
        return out
