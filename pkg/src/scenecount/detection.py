"""Detector-path postprocessing: confidence filter, IoU, greedy NMS, count.

Boundary conventions (pinned for testability):
  * confidence filter keeps score >= threshold (inclusive),
  * NMS suppresses at IoU > threshold (strict), so a pair at exactly the
    threshold survives,
  * score ties in NMS break by ascending input index,
  * zero-area boxes have IoU 0 against everything and are dropped before
    counting so they can neither suppress nor inflate the count.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .domain import BBox, Detection


@dataclass(frozen=True)
class NmsConfig:
    iou_threshold: float = 0.45
    confidence_threshold: float = 0.6

    def __post_init__(self) -> None:
        if not 0.0 <= self.iou_threshold <= 1.0:
            raise ValueError(f"iou_threshold must be in [0,1], got {self.iou_threshold}")
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ValueError(f"confidence_threshold must be in [0,1], got {self.confidence_threshold}")


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union; 0 when the union has no area."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    inter = ix * iy if ix > 0 and iy > 0 else 0.0
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def filter_confidence(dets: Sequence[Detection], threshold: float) -> list[Detection]:
    """Keep detections scoring at least `threshold`, order preserved."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"confidence threshold must be in [0,1], got {threshold}")
    return [d for d in dets if d.score >= threshold]


def nms(dets: Sequence[Detection], iou_threshold: float) -> list[Detection]:
    """Greedy non-maximum suppression.

    Sort by score descending (ties by ascending input index), repeatedly
    keep the best remaining box and suppress the rest overlapping it with
    IoU strictly above the threshold.  Output is in keep order.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError(f"iou threshold must be in [0,1], got {iou_threshold}")
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    kept: list[Detection] = []
    suppressed = [False] * len(dets)
    for pos, i in enumerate(order):
        if suppressed[i]:
            continue
        kept.append(dets[i])
        for j in order[pos + 1:]:
            if not suppressed[j] and iou(dets[i].box, dets[j].box) > iou_threshold:
                suppressed[j] = True
    return kept


def count_detections(dets_raw: Sequence[Detection], cfg: NmsConfig) -> tuple[int, list[Detection]]:
    """Confidence filter + NMS + zero-area drop; the count is what's left."""
    filtered = filter_confidence(dets_raw, cfg.confidence_threshold)
    filtered = [d for d in filtered if d.box.area > 0.0]
    kept = nms(filtered, cfg.iou_threshold)
    return len(kept), kept
