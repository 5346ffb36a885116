"""Format and accuracy rewards for structured rating responses.

A rating response is a flat JSON object mapping each general attribute of the
task to one of ``Great``/``Good``/``Fair``/``Poor``. The format reward is 1
when the candidate parses into exactly that schema; the accuracy reward is the
fraction of attributes whose grade matches the reference, and 0 whenever the
format reward is 0.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Mapping

from radarqa.core import PerformanceLevel


class Task(Enum):
    FRAME = "frame"
    SEQUENCE = "sequence"

    @classmethod
    def parse(cls, text: str) -> "Task":
        key = text.strip().lower()
        aliases = {"frame_rating": "frame", "sequence_rating": "sequence", "task-1": "frame", "task-3": "sequence"}
        return cls(aliases.get(key, key))


FRAME_KEYS = ("miss", "false_alarm", "sharpness", "high_value_match", "overall")
SEQUENCE_KEYS = ("dynamic_consistency", "cumulative_precipitation", "high_value_retain", "overall")
OVERALL = "overall"


def task_keys(task: Task, include_overall: bool = True) -> tuple[str, ...]:
    keys = FRAME_KEYS if task is Task.FRAME else SEQUENCE_KEYS
    return keys if include_overall else tuple(k for k in keys if k != OVERALL)


class RatingParseError(ValueError):
    """Candidate text is not a valid rating for the task; ``reason`` says why."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class RatingResponse:
    task: Task
    entries: Mapping[str, PerformanceLevel]

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", dict(self.entries))

    def to_json(self, **kwargs) -> str:
        keys = task_keys(self.task)
        ordered = {k: self.entries[k].label for k in keys if k in self.entries}
        return json.dumps(ordered, **kwargs)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RatingResponse):
            return NotImplemented
        return self.task is other.task and dict(self.entries) == dict(other.entries)

    def __hash__(self) -> int:
        return hash((self.task, tuple(sorted(self.entries.items()))))


_FENCE = re.compile(r"^\s*```[A-Za-z0-9_-]*[ \t]*\n?(.*?)\n?```\s*$", re.DOTALL)


def _strip_fence(text: str) -> str:
    m = _FENCE.match(text)
    return m.group(1) if m else text


def _no_duplicates(pairs):
    seen = {}
    for k, v in pairs:
        if k in seen:
            raise RatingParseError(f"duplicate key {k}")
        seen[k] = v
    return seen


def _reject_constant(name):
    raise RatingParseError(f"invalid JSON constant {name}")


def parse_rating(text: str, task: Task | str, include_overall: bool = True) -> RatingResponse:
    """Strictly parse ``text`` into a rating for ``task``.

    One surrounding markdown code fence is tolerated. When ``include_overall``
    is false, ``overall`` becomes optional and is dropped.

    Raises:
        RatingParseError: invalid JSON, missing/extra key, or bad value.
    """
    task = Task.parse(task) if isinstance(task, str) else task
    if not isinstance(text, str):
        raise RatingParseError("invalid JSON: candidate is not text")
    try:
        data = json.loads(_strip_fence(text), object_pairs_hook=_no_duplicates,
                          parse_constant=_reject_constant)
    except RatingParseError:
        raise
    except (json.JSONDecodeError, RecursionError) as exc:
        raise RatingParseError(f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise RatingParseError("invalid JSON: top level is not an object")

    required = task_keys(task, include_overall)
    allowed = set(task_keys(task))
    for key in required:
        if key not in data:
            raise RatingParseError(f"missing key {key}")
    for key in data:
        if key not in allowed:
            raise RatingParseError(f"extra key {key}")
    entries = {}
    for key in required:
        value = data[key]
        try:
            entries[key] = PerformanceLevel.parse(value)
        except (KeyError, AttributeError):
            raise RatingParseError(f"bad value {value!r} for key {key}") from None
    return RatingResponse(task, entries)


@dataclass(frozen=True)
class RewardScore:
    format_reward: int
    accuracy_reward: float
    hits: int
    total: int

    def to_dict(self) -> dict:
        return {
            "format_reward": self.format_reward,
            "accuracy_reward": self.accuracy_reward,
            "hits": self.hits,
            "total": self.total,
        }


def compute_reward(candidate: str, truth: RatingResponse, include_overall: bool = True) -> RewardScore:
    """Reward a candidate rating against the reference labels."""
    keys = task_keys(truth.task, include_overall)
    missing = [k for k in keys if k not in truth.entries]
    if missing:
        raise ValueError(f"reference rating lacks keys {missing}")
    try:
        parsed = parse_rating(candidate, truth.task, include_overall)
    except RatingParseError:
        return RewardScore(0, 0.0, 0, len(keys))
    hits = sum(parsed.entries[k] == truth.entries[k] for k in keys)
    return RewardScore(1, hits / len(keys), hits, len(keys))


def infer_task(keys: Iterable[str]) -> Task:
    keys = set(keys)
    if "miss" in keys or "false_alarm" in keys:
        return Task.FRAME
    if "dynamic_consistency" in keys or "cumulative_precipitation" in keys:
        return Task.SEQUENCE
    raise ValueError(f"cannot infer rating task from keys {sorted(keys)}")


def truth_from_json(data: Mapping, task: Task | str | None = None) -> RatingResponse:
    """Build a reference rating from ``{"task": ..., "entries": {...}}`` or a bare rating object."""
    if "entries" in data:
        task = data.get("task", task)
        data = data["entries"]
    if task is None:
        task = infer_task(data)
    return parse_rating(json.dumps(data), task)


def score_jsonl(lines: Iterable[str], default_truth: RatingResponse | None = None,
                include_overall: bool = True) -> Iterator[RewardScore]:
    """Score JSON Lines of ``{"candidate": str, "truth": {...}, "task": str}``.

    ``truth`` and ``task`` may be omitted when ``default_truth`` is given.
    Blank lines are skipped.
    """
    for n, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {n}: invalid JSON ({exc})") from None
        if not isinstance(record, dict) or "candidate" not in record:
            raise ValueError(f"line {n}: expected an object with a 'candidate' field")
        if "truth" in record:
            try:
                truth = truth_from_json(record["truth"], record.get("task"))
            except RatingParseError as exc:
                raise ValueError(f"line {n}: invalid truth ({exc.reason})") from None
        elif default_truth is not None:
            truth = default_truth
        else:
            raise ValueError(f"line {n}: no truth given and no default truth file")
        candidate = record["candidate"]
        if not isinstance(candidate, str):
            candidate = json.dumps(candidate)
        yield compute_reward(candidate, truth, include_overall)
