"""Shared vocabulary types for the counting pipeline.

Everything here is an immutable value type; instances can be shared
freely across threads.
"""
from __future__ import annotations

import enum
import hashlib
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np


class ScenarioLabel(enum.IntEnum):
    """The five-way routing key.

    Integer codes are stable and shared by probability vectors,
    confusion matrices and routing tables.
    """

    SIDE_VIEW = 0
    LONG_SHOT = 1
    TOP_VIEW = 2
    PROTECTIVE_SUIT = 3
    CROWD = 4

    @property
    def tag(self) -> str:
        """Lowercase tag used in manifests, configs and wire JSON."""
        return _LABEL_TAGS[self]

    @property
    def display_name(self) -> str:
        """Capitalized name used in report tables."""
        return _LABEL_DISPLAY[self]

    @classmethod
    def from_tag(cls, tag: str) -> "ScenarioLabel":
        try:
            return _TAG_LABELS[tag]
        except KeyError:
            raise ValueError(
                f"unknown scenario tag {tag!r}; expected one of {sorted(_TAG_LABELS)}"
            ) from None


_LABEL_TAGS = {
    ScenarioLabel.SIDE_VIEW: "side-view",
    ScenarioLabel.LONG_SHOT: "long-shot",
    ScenarioLabel.TOP_VIEW: "top-view",
    ScenarioLabel.PROTECTIVE_SUIT: "protective-suit",
    ScenarioLabel.CROWD: "crowd",
}
_LABEL_DISPLAY = {
    ScenarioLabel.SIDE_VIEW: "Side-View",
    ScenarioLabel.LONG_SHOT: "Long-Shot",
    ScenarioLabel.TOP_VIEW: "Top-View",
    ScenarioLabel.PROTECTIVE_SUIT: "Protective-Suit",
    ScenarioLabel.CROWD: "Crowd",
}
_TAG_LABELS = {tag: label for label, tag in _LABEL_TAGS.items()}

ALL_LABELS: tuple[ScenarioLabel, ...] = tuple(ScenarioLabel)
NUM_SCENARIOS = len(ALL_LABELS)


def label_of_code(code: int) -> ScenarioLabel:
    """Map an integer code 0..4 back to its label."""
    if not isinstance(code, int) or isinstance(code, bool) or not 0 <= code <= 4:
        raise ValueError(f"invalid scenario code {code!r}; expected an integer in 0..4")
    return ScenarioLabel(code)


def round_half_away_from_zero(x: float) -> int:
    """Round to the nearest integer, ties away from zero.

    The one rounding rule used artifact-wide (density counts, split sizing).
    """
    if not math.isfinite(x):
        raise ValueError(f"cannot round non-finite value {x!r}")
    return int(math.floor(x + 0.5)) if x >= 0 else int(math.ceil(x - 0.5))


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in continuous pixel coordinates, corner form."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise ValueError(f"box coordinates must be finite, got {coords}")
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"degenerate box: min corner beyond max corner {coords}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def clipped(self, width: float, height: float) -> "BBox":
        """Clip to the [0,width]x[0,height] canvas."""
        return BBox(
            min(max(self.x_min, 0.0), width),
            min(max(self.y_min, 0.0), height),
            min(max(self.x_max, 0.0), width),
            min(max(self.y_max, 0.0), height),
        )


@dataclass(frozen=True)
class Detection:
    """A scored person/head box emitted by a detector backend."""

    box: BBox
    score: float
    kind: str = "body"  # body | head

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"detection score must be in [0,1], got {self.score}")
        if self.kind not in ("body", "head"):
            raise ValueError(f"detection kind must be body or head, got {self.kind!r}")


class DensityMap:
    """Non-negative 2-D grid whose total mass estimates the person count.

    Raw model output may contain small negative ripples; those are kept
    here and clamped by the counting step (see density.sanitize).
    """

    __slots__ = ("values",)

    def __init__(self, values: np.ndarray):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"density map must be a 2-D grid, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("density map contains non-finite values")
        self.values = arr

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def total_mass(self) -> float:
        return float(self.values.sum())

    def __eq__(self, other: object) -> bool:
        return isinstance(other, DensityMap) and np.array_equal(self.values, other.values)

    def __repr__(self) -> str:
        return f"DensityMap({self.height}x{self.width}, mass={self.total_mass():.3f})"


# --- annotations ------------------------------------------------------------

@dataclass(frozen=True)
class BodyBoxes:
    boxes: tuple[BBox, ...]


@dataclass(frozen=True)
class HeadBoxes:
    boxes: tuple[BBox, ...]


@dataclass(frozen=True)
class HeadDots:
    dots: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class CountOnly:
    count: int

    def __post_init__(self) -> None:
        if self.count < 0:
            raise ValueError(f"count annotation must be non-negative, got {self.count}")


Annotation = Union[BodyBoxes, HeadBoxes, HeadDots, CountOnly]


def count_of_annotation(ann: Annotation) -> int:
    """Person count implied by a raw annotation (total function)."""
    if isinstance(ann, (BodyBoxes, HeadBoxes)):
        return len(ann.boxes)
    if isinstance(ann, HeadDots):
        return len(ann.dots)
    if isinstance(ann, CountOnly):
        return ann.count
    raise TypeError(f"not an annotation: {ann!r}")


@dataclass(frozen=True)
class Sample:
    """One dataset record: image reference, scenario tag, annotation."""

    id: str
    image_ref: str
    scenario: ScenarioLabel
    annotation: Annotation


# --- pipeline I/O -----------------------------------------------------------

@dataclass(frozen=True)
class Frame:
    """A unit of pipeline work.

    `image` is an HxWx3 uint8 RGB array when pixels are available; stub
    backends run fine without them.  `truth`/`true_label` carry ground
    truth in evaluation contexts and stay None in serving contexts.
    """

    frame_id: str
    image: Optional[np.ndarray] = None
    truth: Optional[Annotation] = None
    true_label: Optional[ScenarioLabel] = None

    @classmethod
    def from_bytes(cls, data: bytes) -> "Frame":
        """Decode image bytes; the frame id is the content hash."""
        from PIL import Image, UnidentifiedImageError

        try:
            with Image.open(io.BytesIO(data)) as im:
                rgb = np.asarray(im.convert("RGB"))
        except (UnidentifiedImageError, OSError, ValueError) as exc:
            raise ValueError(f"cannot decode image bytes: {exc}") from exc
        return cls(frame_id=hashlib.sha256(data).hexdigest(), image=rgb)

    @classmethod
    def from_sample(cls, sample: Sample, image: Optional[np.ndarray] = None) -> "Frame":
        return cls(
            frame_id=sample.id,
            image=image,
            truth=sample.annotation,
            true_label=sample.scenario,
        )


@dataclass(frozen=True)
class BoxArtifacts:
    """Detector-path artifacts: the post-NMS detections."""

    detections: tuple[Detection, ...]
    kind: str


@dataclass(frozen=True)
class DensityArtifacts:
    """Density-path artifacts: the sanitized map plus clamp bookkeeping."""

    density: DensityMap
    clamped_cells: int


Artifacts = Union[BoxArtifacts, DensityArtifacts]


@dataclass(frozen=True)
class FrameResult:
    """Per-frame pipeline output."""

    frame_id: str
    label: ScenarioLabel
    probs: tuple[float, ...]
    model_id: str
    count: int
    artifacts: Optional[Artifacts] = None
    latency_s: float = 0.0

    def __post_init__(self) -> None:
        if len(self.probs) != NUM_SCENARIOS:
            raise ValueError(f"probs must have {NUM_SCENARIOS} entries, got {len(self.probs)}")
        if abs(sum(self.probs) - 1.0) > 1e-6:
            raise ValueError(f"probs must sum to 1, got {sum(self.probs)!r}")
        if self.count < 0:
            raise ValueError(f"count must be non-negative, got {self.count}")


@dataclass(frozen=True)
class FrameError:
    """FrameResult-shaped error record; streams carry on past bad frames."""

    frame_id: str
    stage: str  # decode | classify | count
    message: str
