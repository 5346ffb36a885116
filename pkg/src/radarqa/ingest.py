"""Frame and manifest I/O, colour rendering, synthetic storms and degradations.

Supported frame files, chosen by suffix:

* ``.pgm``  binary PGM (``P5``), maxval <= 255
* ``.raw`` / ``.bin``  unsigned bytes, row-major, with a JSON sidecar
  ``<stem>.json`` holding ``{"width": W, "height": H}``
* ``.npy``  NumPy ``uint8`` array of shape ``(H, W)`` or ``(T, H, W)``
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from radarqa.core import (
    DEFAULT_LEVEL_BOUNDARIES,
    MAX_CODE,
    MIN_SIDE,
    FrameValueError,
    RadarFrame,
    RadarSequence,
)

PathLike = Union[str, Path]


class FrameReadError(ValueError):
    """Base class for unreadable or invalid frame files."""


class MalformedHeaderError(FrameReadError):
    pass


class UnsupportedDepthError(FrameReadError):
    pass


class FrameDimensionError(FrameReadError):
    pass


class ValueRangeError(FrameReadError):
    pass


class UnsupportedFormatError(FrameReadError):
    pass


class PairingError(ValueError):
    """Ground truth and prediction do not line up."""


class ManifestError(ValueError):
    pass


_PGM_HEADER = re.compile(
    rb"^P5(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)\s"
)


def _validated(arr: np.ndarray, path: PathLike) -> RadarFrame:
    if arr.ndim != 2:
        raise FrameDimensionError(f"{path}: expected a 2-D frame, got shape {arr.shape}")
    h, w = arr.shape
    if h < MIN_SIDE or w < MIN_SIDE:
        raise FrameDimensionError(f"{path}: frame {w}x{h} is smaller than {MIN_SIDE}x{MIN_SIDE}")
    if arr.size and int(arr.max()) > MAX_CODE:
        raise ValueRangeError(f"{path}: value {int(arr.max())} exceeds {MAX_CODE}")
    return RadarFrame(arr)


def _read_pgm(path: Path) -> np.ndarray:
    data = path.read_bytes()
    m = _PGM_HEADER.match(data)
    if m is None:
        raise MalformedHeaderError(f"{path}: not a binary (P5) PGM file")
    width, height, maxval = (int(g) for g in m.groups())
    if maxval > 255:
        raise UnsupportedDepthError(f"{path}: maxval {maxval} is not 8-bit")
    if maxval < 1:
        raise MalformedHeaderError(f"{path}: invalid maxval {maxval}")
    payload = data[m.end():]
    if len(payload) < width * height:
        raise MalformedHeaderError(
            f"{path}: header declares {width}x{height} but only {len(payload)} bytes follow"
        )
    return np.frombuffer(payload, dtype=np.uint8, count=width * height).reshape(height, width)


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def _read_raw(path: Path) -> np.ndarray:
    side = _sidecar(path)
    try:
        meta = json.loads(side.read_text(encoding="utf-8"))
        width, height = int(meta["width"]), int(meta["height"])
    except FileNotFoundError:
        raise MalformedHeaderError(f"{path}: missing sidecar {side}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise MalformedHeaderError(f"{side}: invalid sidecar ({exc})") from None
    payload = path.read_bytes()
    if len(payload) != width * height:
        raise MalformedHeaderError(
            f"{path}: sidecar declares {width}x{height} but file holds {len(payload)} bytes"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width)


def _read_npy(path: Path) -> np.ndarray:
    try:
        arr = np.load(path, allow_pickle=False)
    except ValueError as exc:
        raise MalformedHeaderError(f"{path}: {exc}") from None
    if arr.dtype != np.uint8:
        raise UnsupportedDepthError(f"{path}: dtype {arr.dtype} is not uint8")
    return arr


def read_frames(path: PathLike) -> list[RadarFrame]:
    """Read every frame stored in ``path`` (several only for 3-D ``.npy`` stacks)."""
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"frame file not found: {p}")
    suffix = p.suffix.lower()
    if suffix == ".pgm":
        arrs = [_read_pgm(p)]
    elif suffix in (".raw", ".bin"):
        arrs = [_read_raw(p)]
    elif suffix == ".npy":
        arr = _read_npy(p)
        if arr.ndim == 3:
            arrs = list(arr)
        elif arr.ndim == 2:
            arrs = [arr]
        else:
            raise FrameDimensionError(f"{p}: expected shape (H, W) or (T, H, W), got {arr.shape}")
    else:
        raise UnsupportedFormatError(f"{p}: unsupported frame format {suffix!r}")
    return [_validated(a, p) for a in arrs]


def read_frame(path: PathLike) -> RadarFrame:
    frames = read_frames(path)
    if len(frames) != 1:
        raise FrameDimensionError(f"{path}: holds {len(frames)} frames, expected one")
    return frames[0]


def write_frame(path: PathLike, frame: RadarFrame) -> Path:
    p = Path(path)
    suffix = p.suffix.lower()
    v = np.ascontiguousarray(frame.values, dtype=np.uint8)
    if suffix == ".pgm":
        p.write_bytes(b"P5\n%d %d\n255\n" % (frame.width, frame.height) + v.tobytes())
    elif suffix in (".raw", ".bin"):
        p.write_bytes(v.tobytes())
        _sidecar(p).write_text(json.dumps({"width": frame.width, "height": frame.height}) + "\n",
                               encoding="utf-8")
    elif suffix == ".npy":
        np.save(p, v, allow_pickle=False)
    else:
        raise UnsupportedFormatError(f"{p}: unsupported frame format {suffix!r}")
    return p


def write_sequence_npy(path: PathLike, seq: RadarSequence) -> Path:
    np.save(Path(path), seq.to_array(), allow_pickle=False)
    return Path(path)


@dataclass(frozen=True)
class PairManifest:
    """Pairing of observed and forecast frame files.

    Paths are stored resolved; in the JSON file they are relative to the
    manifest's directory.
    """

    ground_truth: tuple[Path, ...]
    prediction: tuple[Path, ...]
    kind: str = "sequence"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in ("frame", "sequence"):
            raise ManifestError(f"manifest kind must be 'frame' or 'sequence', got {self.kind!r}")
        if not self.ground_truth or not self.prediction:
            raise ManifestError("manifest needs at least one ground-truth and one prediction path")

    @classmethod
    def load(cls, path: PathLike) -> "PairManifest":
        p = Path(path)
        if not p.is_file():
            raise FileNotFoundError(f"manifest not found: {p}")
        try:
            data = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{p}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ManifestError(f"{p}: manifest must be a JSON object")
        missing = [k for k in ("ground_truth", "prediction") if k not in data]
        if missing:
            raise ManifestError(f"{p}: missing keys {missing}")
        base = p.parent

        def paths(v) -> tuple[Path, ...]:
            items = [v] if isinstance(v, str) else v
            if not isinstance(items, list) or not all(isinstance(s, str) for s in items):
                raise ManifestError(f"{p}: frame paths must be a string or a list of strings")
            return tuple(base / s for s in items)

        meta = data.get("metadata", {})
        if not isinstance(meta, dict):
            raise ManifestError(f"{p}: metadata must be an object")
        return cls(
            paths(data["ground_truth"]),
            paths(data["prediction"]),
            kind=str(data.get("kind", "sequence")).lower(),
            metadata={str(k): str(v) for k, v in meta.items()},
        )

    def to_json(self, base: PathLike) -> str:
        b = Path(base)

        def rel(ps):
            return [Path(q).relative_to(b).as_posix() if Path(q).is_absolute() else Path(q).as_posix()
                    for q in ps]

        data = {
            "kind": self.kind,
            "ground_truth": rel(self.ground_truth),
            "prediction": rel(self.prediction),
            "metadata": dict(sorted(self.metadata.items())),
        }
        return json.dumps(data, indent=2) + "\n"


def _load_side(paths: Iterable[Path]) -> list[RadarFrame]:
    frames: list[RadarFrame] = []
    for q in paths:
        frames.extend(read_frames(q))
    return frames


def read_sequence(manifest: PairManifest) -> tuple[RadarSequence, RadarSequence]:
    """Load ``(ground_truth, prediction)`` and check they pair frame by frame."""
    gt = _load_side(manifest.ground_truth)
    pred = _load_side(manifest.prediction)
    if len(gt) != len(pred):
        raise PairingError(f"ground truth has {len(gt)} frames but prediction has {len(pred)}")
    for i, (g, p) in enumerate(zip(gt, pred)):
        if g.shape != p.shape:
            raise PairingError(
                f"frame {i}: ground truth is {g.width}x{g.height} but prediction is {p.width}x{p.height}"
            )
    try:
        return RadarSequence(tuple(gt)), RadarSequence(tuple(pred))
    except FrameValueError as exc:
        raise PairingError(str(exc)) from None


# ---------------------------------------------------------------- rendering

Palette = Sequence[tuple[int, tuple[int, int, int]]]

DEFAULT_PALETTE: tuple[tuple[int, tuple[int, int, int]], ...] = (
    (0, (0, 0, 0)),
    (DEFAULT_LEVEL_BOUNDARIES[0], (0, 150, 60)),
    (DEFAULT_LEVEL_BOUNDARIES[1], (250, 240, 0)),
    (DEFAULT_LEVEL_BOUNDARIES[2], (255, 150, 0)),
    (DEFAULT_LEVEL_BOUNDARIES[3], (230, 20, 20)),
    (DEFAULT_LEVEL_BOUNDARIES[4], (160, 0, 160)),
    (DEFAULT_LEVEL_BOUNDARIES[5], (255, 200, 255)),
)
"""Black below the first level, then one colour per rainfall level."""


def load_palette(path: PathLike) -> list[tuple[int, tuple[int, int, int]]]:
    """Read ``[[threshold, [r, g, b]], ...]`` from JSON."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [(int(t), tuple(int(c) for c in rgb)) for t, rgb in data]


def render(frame: RadarFrame, palette: Palette = DEFAULT_PALETTE) -> np.ndarray:
    """Colour each pixel by the last palette entry whose threshold it reaches.

    Pixels below the first threshold stay black. Returns ``(H, W, 3)`` uint8.
    """
    if not palette:
        raise ValueError("palette must not be empty")
    thresholds = np.array([t for t, _ in palette])
    if np.any(np.diff(thresholds) <= 0):
        raise ValueError("palette thresholds must be strictly increasing")
    colours = np.array([rgb for _, rgb in palette], dtype=np.uint8)
    idx = np.searchsorted(thresholds, frame.values, side="right") - 1
    out = colours[np.clip(idx, 0, None)]
    out[idx < 0] = 0
    return out


def write_image(path: PathLike, rgb: np.ndarray) -> Path:
    """Write an RGB buffer as PNG or binary PPM (``.ppm``)."""
    from PIL import Image

    p = Path(path)
    fmt = {".png": "PNG", ".ppm": "PPM"}.get(p.suffix.lower())
    if fmt is None:
        raise UnsupportedFormatError(f"{p}: images are written as .png or .ppm")
    Image.fromarray(np.asarray(rgb, dtype=np.uint8), mode="RGB").save(p, format=fmt)
    return p


# ---------------------------------------------------------------- synthesis

@dataclass(frozen=True)
class Blob:
    """Isotropic Gaussian intensity bump centred at column ``x``, row ``y`` in frame 0."""

    x: float
    y: float
    sigma: float
    amplitude: float


def blob_frame(width: int, height: int, blobs: Sequence[Blob], offset: tuple[float, float] = (0.0, 0.0)) -> RadarFrame:
    cols = np.arange(width, dtype=np.float64)[None, :]
    rows = np.arange(height, dtype=np.float64)[:, None]
    field_ = np.zeros((height, width))
    for b in blobs:
        cx, cy = b.x + offset[0], b.y + offset[1]
        field_ += b.amplitude * np.exp(-((cols - cx) ** 2 + (rows - cy) ** 2) / (2.0 * b.sigma ** 2))
    return RadarFrame(np.clip(np.rint(field_), 0, MAX_CODE).astype(np.uint8))


def random_blobs(rng: np.random.Generator, width: int, height: int, count: int) -> list[Blob]:
    side = min(width, height)
    return [
        Blob(
            x=float(rng.uniform(0, width)),
            y=float(rng.uniform(0, height)),
            sigma=float(rng.uniform(side / 16, side / 6)),
            amplitude=float(rng.uniform(120, 254)),
        )
        for _ in range(count)
    ]


def synth_sequence(
    seed: int,
    frames: int = 12,
    width: int = 96,
    height: int = 96,
    blob_count: int = 3,
    advection: tuple[float, float] = (2.0, 1.0),
    blobs: Sequence[Blob] | None = None,
) -> RadarSequence:
    """Gaussian storm blobs translated by ``advection`` (columns, rows) each frame.

    ``blobs`` overrides the random draw; otherwise ``blob_count`` blobs are
    drawn from a generator seeded with ``seed``.
    """
    if frames < 1 or width < MIN_SIDE or height < MIN_SIDE or blob_count < 0:
        raise ValueError("frames must be positive, dimensions at least 3, blob_count non-negative")
    if blobs is None:
        blobs = random_blobs(np.random.default_rng(seed), width, height, blob_count)
    dx, dy = advection
    return RadarSequence(tuple(blob_frame(width, height, blobs, (dx * t, dy * t)) for t in range(frames)))


CANONICAL_BLOBS = (
    Blob(x=28.0, y=30.0, sigma=7.0, amplitude=250.0),
    Blob(x=58.0, y=52.0, sigma=10.0, amplitude=190.0),
    Blob(x=40.0, y=68.0, sigma=5.0, amplitude=240.0),
)


def canonical_blob_sequence(frames: int = 12) -> RadarSequence:
    """Fixed 96x96 storm whose convective cores exceed code 219 in every frame."""
    return synth_sequence(0, frames=frames, width=96, height=96, advection=(2.0, 1.0),
                          blobs=CANONICAL_BLOBS)


# -------------------------------------------------------------- degradation

@dataclass(frozen=True)
class Blur:
    radius: int

    def __post_init__(self) -> None:
        if self.radius < 0:
            raise ValueError("blur radius must be non-negative")


@dataclass(frozen=True)
class Shift:
    dx: int
    dy: int


@dataclass(frozen=True)
class GainScale:
    factor: float

    def __post_init__(self) -> None:
        if not self.factor > 0:
            raise ValueError("gain factor must be positive")


@dataclass(frozen=True)
class HighValueSuppress:
    cap: int

    def __post_init__(self) -> None:
        if not 0 <= self.cap <= MAX_CODE:
            raise ValueError(f"cap must lie in [0, {MAX_CODE}]")


@dataclass(frozen=True)
class AdditiveNoise:
    amplitude: float
    seed: int = 0

    def __post_init__(self) -> None:
        if self.amplitude < 0:
            raise ValueError("noise amplitude must be non-negative")


Operator = Union[Blur, Shift, GainScale, HighValueSuppress, AdditiveNoise]


@dataclass(frozen=True)
class DegradationSpec:
    operators: tuple[Operator, ...] = ()

    @classmethod
    def parse(cls, text: str) -> "DegradationSpec":
        """Parse ``"blur:3,shift:2:-1,gain:0.9,suppress:219,noise:5:42"``."""
        ops: list[Operator] = []
        for part in filter(None, (s.strip() for s in text.split(","))):
            name, *args = part.split(":")
            try:
                if name == "blur":
                    ops.append(Blur(int(args[0])))
                elif name == "shift":
                    ops.append(Shift(int(args[0]), int(args[1])))
                elif name == "gain":
                    ops.append(GainScale(float(args[0])))
                elif name == "suppress":
                    ops.append(HighValueSuppress(int(args[0])))
                elif name == "noise":
                    ops.append(AdditiveNoise(float(args[0]), int(args[1]) if len(args) > 1 else 0))
                else:
                    raise ValueError(f"unknown degradation {name!r}")
            except IndexError:
                raise ValueError(f"degradation {part!r} is missing arguments") from None
        return cls(tuple(ops))


def _box_blur(a: np.ndarray, radius: int) -> np.ndarray:
    if radius == 0:
        return a
    k = 2 * radius + 1
    padded = np.pad(a.astype(np.float64), radius, mode="edge")
    return np.rint(sliding_window_view(padded, (k, k)).mean(axis=(-1, -2)))


def _shift(a: np.ndarray, dx: int, dy: int) -> np.ndarray:
    out = np.zeros_like(a)
    h, w = a.shape
    if abs(dx) >= w or abs(dy) >= h:
        return out
    src = a[max(0, -dy):h - max(0, dy), max(0, -dx):w - max(0, dx)]
    out[max(0, dy):max(0, dy) + src.shape[0], max(0, dx):max(0, dx) + src.shape[1]] = src
    return out


def _gain(stack: np.ndarray, factor: float) -> np.ndarray:
    # Error-diffused rounding over the whole sequence keeps the total mass at
    # round(factor * total) instead of accumulating per-pixel rounding bias.
    flat = stack.astype(np.int64).ravel()
    cum = np.concatenate(([0], np.cumsum(flat)))
    target = np.rint(factor * cum)
    return np.diff(target).reshape(stack.shape)


def degrade(seq: RadarSequence, spec: DegradationSpec) -> RadarSequence:
    """Apply each operator of ``spec`` in order to every frame."""
    stack = seq.to_array().astype(np.float64)
    for op in spec.operators:
        if isinstance(op, Blur):
            stack = np.stack([_box_blur(f, op.radius) for f in stack])
        elif isinstance(op, Shift):
            stack = np.stack([_shift(f, op.dx, op.dy) for f in stack])
        elif isinstance(op, GainScale):
            if op.factor != 1.0:
                stack = _gain(np.clip(stack, 0, MAX_CODE), op.factor).astype(np.float64)
        elif isinstance(op, HighValueSuppress):
            stack = np.minimum(stack, op.cap)
        elif isinstance(op, AdditiveNoise):
            if op.amplitude > 0:
                rng = np.random.default_rng(op.seed)
                stack = np.rint(stack + rng.uniform(-op.amplitude, op.amplitude, stack.shape))
        else:
            raise TypeError(f"unknown degradation operator {op!r}")
        stack = np.clip(stack, 0, MAX_CODE)
    return RadarSequence(tuple(RadarFrame(f.astype(np.uint8)) for f in stack), seq.frame_interval_minutes)
