"""Attribute-based verification of radar VIL precipitation forecasts."""

from radarqa.core import (
    ContingencyTable,
    Direction,
    GradingScale,
    Orientation,
    PerformanceLevel,
    RadarFrame,
    RadarSequence,
    RainfallLevel,
    discretize,
    grade,
    sector_of,
)
from radarqa.config import RunConfig
from radarqa.frame_metrics import FrameAttributeReport, analyze_frame
from radarqa.sequence_metrics import SequenceAttributeReport, analyze_sequence

__version__ = "0.1.0"

__all__ = [
    "ContingencyTable",
    "Direction",
    "FrameAttributeReport",
    "GradingScale",
    "Orientation",
    "PerformanceLevel",
    "RadarFrame",
    "RadarSequence",
    "RainfallLevel",
    "RunConfig",
    "SequenceAttributeReport",
    "analyze_frame",
    "analyze_sequence",
    "discretize",
    "grade",
    "sector_of",
]
