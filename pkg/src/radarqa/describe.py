"""Templated assessment text built from attribute reports, plus optional LLM polish.

The deterministic template text is the record; polishing only rephrases it
and falls back to the input on any failure.
"""

from __future__ import annotations

import json
import logging
import os
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from radarqa.core import Direction, RainfallLevel
from radarqa.frame_metrics import FrameAttributeReport, MismatchType
from radarqa.sequence_metrics import CumulativeDifference, SequenceAttributeReport

log = logging.getLogger(__name__)

HUMAN_LABEL_KEYS: tuple[str, ...] = (
    "shape_change",
    "scale_change",
    "convective_cell_change",
    "intensity_change",
    "dynamic_consistency_performance",
    "move_direction",
    "speed_difference",
    "rotation_center",
    "difference_in_generation",
    "difference_in_dissipation",
    "shape_type",
    "shape_mismatch_direction",
    "shape_mismatch_reason",
    "artifacts_direction",
    "organization_degree",
    "overall_performance_sequence",
    "overall_performance_frame",
)
"""The manually annotated attributes; accepted verbatim, never computed."""


class LabelValidationError(ValueError):
    pass


@dataclass(frozen=True)
class DescriptionTemplate:
    attribute: str
    pattern: str

    def render(self, **values: str) -> str:
        return self.pattern.format(**values)


TEMPLATES: dict[str, DescriptionTemplate] = {
    t.attribute: t
    for t in (
        DescriptionTemplate("miss", "In the {direction}, {raw_level} is misclassified as {error_level}."),
        DescriptionTemplate("false_alarm", "In the {direction}, {raw_level} is false alarmed as {error_level}."),
        DescriptionTemplate("high_value_mismatch", "In the {direction}, the prediction {type} high values."),
        DescriptionTemplate("cumulative", "In the {direction}, the cumulate precipitation is {difference}."),
    )
}

_MISMATCH_VERB = {
    MismatchType.OVER_PREDICT: "over-predicts",
    MismatchType.UNDER_PREDICT: "under-predicts",
}
_CUMULATIVE_WORD = {
    CumulativeDifference.OVERESTIMATE: "overestimated",
    CumulativeDifference.UNDERESTIMATE: "underestimated",
}


def _raw_phrase(level: RainfallLevel) -> str:
    return "the sunny area" if level is RainfallLevel.SUNNY else f"{level.word} precipitation"


def frame_sentences(report: FrameAttributeReport) -> list[tuple[str, str]]:
    """``(attribute, sentence)`` pairs in a fixed order."""
    out = [("miss_performance", f"Miss performance is {report.miss_performance.label}.")]
    if report.miss_direction is not None and report.miss_level is not None:
        out.append(("miss", TEMPLATES["miss"].render(
            direction=report.miss_direction.word,
            raw_level=_raw_phrase(report.raw_level_miss),
            error_level=report.miss_level.word,
        )))
    else:
        out.append(("miss", "No rainfall level is notably missed."))

    out.append(("far_performance", f"False alarm performance is {report.far_performance.label}."))
    if report.far_direction is not None and report.far_level is not None:
        out.append(("false_alarm", TEMPLATES["false_alarm"].render(
            direction=report.far_direction.word,
            raw_level=_raw_phrase(report.raw_level_far),
            error_level=report.far_level.word,
        )))
    else:
        out.append(("false_alarm", "No rainfall level is notably false alarmed."))

    out.append(("sharpness_performance", f"Sharpness performance is {report.sharpness_performance.label}."))
    out.append(("high_value_performance",
                f"High value match performance is {report.high_value_performance.label}."))
    out.append(_hv_sentence(report.hv_mismatch_type, report.hv_mismatch_direction))
    out.append(("max_rainfall_level",
                f"The maximum rainfall level in the observation is {report.max_rainfall_level.word}."))
    if report.distribution:
        d, frac = report.distribution[0]
        out.append(("distribution",
                    f"Observed precipitation is concentrated in the {d.word} ({frac:.0%} of the total)."))
    else:
        out.append(("distribution", "No precipitation is observed."))
    return out


def _hv_sentence(kind: MismatchType, direction: Direction | None) -> tuple[str, str]:
    if kind is MismatchType.BALANCED or direction is None:
        return ("high_value_mismatch", "High-value regions show no systematic mismatch.")
    return ("high_value_mismatch", TEMPLATES["high_value_mismatch"].render(
        direction=direction.word, type=_MISMATCH_VERB[kind]))


def describe_frame(report: FrameAttributeReport, human_labels: Mapping[str, str] | None = None) -> str:
    pairs = frame_sentences(report) + label_sentences(human_labels)
    return " ".join(s for _, s in pairs)


def label_sentences(labels: Mapping[str, str] | None) -> list[tuple[str, str]]:
    """Human-annotated labels, passed through verbatim in canonical key order."""
    return [(k, f"{k.replace('_', ' ').capitalize()}: {v}.") for k, v in validate_labels(labels).items()]


def validate_labels(labels: Mapping[str, str] | None) -> dict[str, str]:
    if not labels:
        return {}
    unknown = sorted(set(labels) - set(HUMAN_LABEL_KEYS))
    if unknown:
        raise LabelValidationError(
            f"unknown human-label keys {unknown}; accepted keys: {', '.join(HUMAN_LABEL_KEYS)}"
        )
    return {k: str(labels[k]) for k in HUMAN_LABEL_KEYS if k in labels}


def load_labels(path: str | Path) -> dict[str, str]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise LabelValidationError(f"{path}: labels must be a flat JSON object")
    return validate_labels(data)


def sequence_sentences(report: SequenceAttributeReport, human_labels: Mapping[str, str] | None = None) -> list[tuple[str, str]]:
    out = [
        ("high_value_retain_performance",
         f"High value retain performance is {report.high_value_retain_performance.label}."),
        _hv_sentence(report.hv_mismatch_type_seq, report.hv_mismatch_direction_seq),
        ("cumulative_performance",
         f"Cumulate precipitation performance is {report.cumulative_performance.label}."),
    ]
    diff = report.cumulative_difference
    if diff is CumulativeDifference.BALANCED or report.cumulative_mismatch_direction is None:
        out.append(("cumulative", "The cumulate precipitation matches the observation."))
    else:
        out.append(("cumulative", TEMPLATES["cumulative"].render(
            direction=report.cumulative_mismatch_direction.word, difference=_CUMULATIVE_WORD[diff])))
    return out + label_sentences(human_labels)


def describe_sequence(report: SequenceAttributeReport, human_labels: Mapping[str, str] | None = None) -> str:
    return " ".join(s for _, s in sequence_sentences(report, human_labels))


# ------------------------------------------------------------------ polish

POLISH_INSTRUCTIONS = (
    "You are a meteorologist reviewing a radar precipitation forecast. Rewrite the "
    "assessment below into a fluent report. Keep every stated fact, direction and "
    "rating; correct potential inconsistencies; do not add new claims. "
    "(Reconstructed prompt, not the original annotation prompt.)"
)


@dataclass(frozen=True)
class PolishConfig:
    url: str
    model: str
    key: str = ""
    timeout: float = 30.0

    @classmethod
    def from_env(cls, env: Mapping[str, str] | None = None, **overrides) -> "PolishConfig | None":
        """Read ``RADARQA_POLISH_URL``/``_MODEL``/``_KEY``/``_TIMEOUT``; None if no URL is set.

        Non-None keyword ``overrides`` (url, model, key, timeout) take precedence.
        """
        e = os.environ if env is None else env
        values = {
            "url": e.get("RADARQA_POLISH_URL"),
            "model": e.get("RADARQA_POLISH_MODEL", "gpt-4o"),
            "key": e.get("RADARQA_POLISH_KEY", ""),
            "timeout": float(e.get("RADARQA_POLISH_TIMEOUT", "30")),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        if not values["url"]:
            return None
        return cls(**values)


@dataclass(frozen=True)
class PolishResult:
    text: str
    warning: str | None = None


def polish(text: str, config: PolishConfig | None, attributes: Mapping[str, object] | None = None) -> PolishResult:
    """Ask an OpenAI-compatible chat endpoint to rephrase ``text``.

    Never raises: any failure returns the original text with a warning.
    """
    if config is None:
        return PolishResult(text, "polish endpoint not configured")
    system = POLISH_INSTRUCTIONS
    if attributes:
        system += "\nAttributes: " + json.dumps(attributes, sort_keys=True)
    body = json.dumps({
        "model": config.model,
        "messages": [
            {"role": "system", "content": system},
            {"role": "user", "content": text},
        ],
    }).encode("utf-8")
    headers = {"Content-Type": "application/json"}
    if config.key:
        headers["Authorization"] = f"Bearer {config.key}"
    req = urllib.request.Request(config.url, data=body, headers=headers, method="POST")
    try:
        with urllib.request.urlopen(req, timeout=config.timeout) as resp:
            if resp.status != 200:
                return _fallback(text, f"polish endpoint returned HTTP {resp.status}")
            payload = json.loads(resp.read().decode("utf-8"))
        content = payload["choices"][0]["message"]["content"]
        if not isinstance(content, str) or not content.strip():
            return _fallback(text, "polish endpoint returned empty content")
        return PolishResult(content)
    except urllib.error.HTTPError as exc:
        return _fallback(text, f"polish endpoint returned HTTP {exc.code}")
    except (urllib.error.URLError, OSError, TimeoutError) as exc:
        return _fallback(text, f"polish endpoint unreachable: {exc}")
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        return _fallback(text, f"malformed polish response: {exc!r}")


def _fallback(text: str, warning: str) -> PolishResult:
    log.warning(warning)
    return PolishResult(text, warning)
