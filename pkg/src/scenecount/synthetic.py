"""Deterministic synthetic scenes and manifests for stub-backed runs.

Grid placement keeps ground-truth boxes disjoint so a perfect detector
stub reproduces the annotated count exactly through NMS.
"""
from __future__ import annotations

import random

from .dataset import DatasetManifest
from .domain import (
    Annotation,
    BBox,
    BodyBoxes,
    CountOnly,
    HeadBoxes,
    HeadDots,
    Sample,
    ScenarioLabel,
)

DEFAULT_CANVAS = (640, 640)  # (width, height)
DOT_BOX_SIZE = 12.0


def grid_boxes(k: int, canvas: tuple[int, int] = DEFAULT_CANVAS,
               box_size: float = 24.0, gap: float = 12.0) -> list[BBox]:
    """k disjoint boxes laid out row-major on a grid."""
    if k < 0:
        raise ValueError(f"box count must be non-negative, got {k}")
    width, height = canvas
    pitch = box_size + gap
    per_row = max(1, int(width // pitch))
    max_rows = max(1, int(height // pitch))
    if k > per_row * max_rows:
        raise ValueError(f"{k} boxes do not fit a {width}x{height} canvas at pitch {pitch}")
    boxes = []
    for i in range(k):
        r, c = divmod(i, per_row)
        x = gap / 2 + c * pitch
        y = gap / 2 + r * pitch
        boxes.append(BBox(x, y, x + box_size, y + box_size))
    return boxes


def dot_box(x: float, y: float, canvas: tuple[int, int] = DEFAULT_CANVAS,
            size: float = DOT_BOX_SIZE) -> BBox:
    """Fixed-size box centered on a head dot, clipped to the canvas."""
    half = size / 2
    return BBox(x - half, y - half, x + half, y + half).clipped(*canvas)


def boxes_from_annotation(ann: Annotation, canvas: tuple[int, int] = DEFAULT_CANVAS) -> list[BBox]:
    """Ground-truth boxes implied by any annotation style.

    Box annotations pass through; dots become fixed-size head boxes;
    bare counts become disjoint grid boxes.
    """
    if isinstance(ann, (BodyBoxes, HeadBoxes)):
        return list(ann.boxes)
    if isinstance(ann, HeadDots):
        return [dot_box(x, y, canvas) for x, y in ann.dots]
    if isinstance(ann, CountOnly):
        return grid_boxes(ann.count, canvas)
    raise TypeError(f"not an annotation: {ann!r}")


_SCENARIO_STYLE = {
    ScenarioLabel.SIDE_VIEW: "body_boxes",
    ScenarioLabel.LONG_SHOT: "body_boxes",
    ScenarioLabel.TOP_VIEW: "head_boxes",
    ScenarioLabel.PROTECTIVE_SUIT: "body_boxes",
    ScenarioLabel.CROWD: "head_dots",
}


def synthetic_manifest(scenario: ScenarioLabel, n: int, seed: int,
                       count_range: tuple[int, int],
                       canvas: tuple[int, int] = DEFAULT_CANVAS) -> DatasetManifest:
    """A manifest of n synthetic samples with the scenario's annotation style."""
    lo, hi = count_range
    if lo < 0 or hi < lo:
        raise ValueError(f"bad count range {count_range}")
    rng = random.Random(seed)
    style = _SCENARIO_STYLE[scenario]
    width, height = canvas
    samples = []
    for i in range(n):
        count = rng.randint(lo, hi)
        sid = f"{scenario.tag}-{i:05d}"
        if style == "head_dots":
            dots = tuple(
                (rng.uniform(0, width), rng.uniform(0, height)) for _ in range(count)
            )
            ann: Annotation = HeadDots(dots)
        else:
            boxes = tuple(grid_boxes(count, canvas))
            ann = HeadBoxes(boxes) if style == "head_boxes" else BodyBoxes(boxes)
        samples.append(Sample(
            id=sid,
            image_ref=f"{sid}.jpg",
            scenario=scenario,
            annotation=ann,
        ))
    return DatasetManifest(name=scenario.tag, samples=samples)
