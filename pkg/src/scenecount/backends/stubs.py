"""Deterministic stub backends.

Every stub is a pure function of (frame id, seed, parameters): outputs
are keyed by a hash of the frame id rather than call order, so parallel
evaluation is order-independent and repeated calls are identical.

Stubs with `oracle` behavior consume the frame's attached ground truth;
frames without ground truth need the explicit fallbacks (`fixed_label`,
`synthetic_count`, constant `mass`).
"""
from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from ..domain import (
    BBox,
    DensityMap,
    Detection,
    Frame,
    ScenarioLabel,
    count_of_annotation,
)
from ..synthetic import DEFAULT_CANVAS, boxes_from_annotation, grid_boxes
from .base import BackendError

_LOGIT_HIGH = 12.0


def frame_rng(seed: int, frame_id: str) -> random.Random:
    """Seeded PRNG derived from (seed, frame id); stable across runs."""
    digest = hashlib.sha256(f"{seed}:{frame_id}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


# --- score distributions ----------------------------------------------------

@dataclass(frozen=True)
class ScoreDist:
    """Detection score sampler: constant value or uniform range."""

    kind: str = "constant"
    value: float = 0.9
    low: float = 0.7
    high: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("constant", "uniform"):
            raise ValueError(f"unknown score distribution {self.kind!r}")
        for v in (self.value, self.low, self.high):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"score distribution values must be in [0,1], got {v}")
        if self.kind == "uniform" and self.low > self.high:
            raise ValueError(f"uniform score range is inverted: [{self.low}, {self.high}]")

    def sample(self, rng: random.Random) -> float:
        if self.kind == "constant":
            return self.value
        return rng.uniform(self.low, self.high)


# --- classifier stub --------------------------------------------------------

def identity_confusion() -> np.ndarray:
    return np.eye(5, dtype=np.float64)


class StubClassifier:
    """Emits one-hot logits whose argmax is drawn from the confusion row of
    the frame's true label.  An identity matrix is a perfect classifier.

    `fixed_label` bypasses the matrix entirely (always that label), which
    covers frames with no ground truth attached and forced-misroute
    experiments.
    """

    thread_safe = True

    def __init__(self, confusion: Optional[np.ndarray] = None, seed: int = 0,
                 fixed_label: Optional[ScenarioLabel] = None):
        matrix = identity_confusion() if confusion is None else np.asarray(confusion, dtype=np.float64)
        if matrix.shape != (5, 5):
            raise ValueError(f"confusion matrix must be 5x5, got {matrix.shape}")
        if matrix.min() < 0.0 or np.any(np.abs(matrix.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("confusion matrix must be row-stochastic (rows sum to 1, entries >= 0)")
        self.confusion = matrix
        self.seed = seed
        self.fixed_label = fixed_label

    def _draw(self, row: np.ndarray, rng: random.Random) -> int:
        u = rng.random()
        acc = 0.0
        for j, p in enumerate(row):
            acc += p
            if u < acc:
                return j
        return 4  # guard against row sums a hair under 1

    def logits(self, tensor, frame: Frame) -> np.ndarray:
        if self.fixed_label is not None:
            pred = int(self.fixed_label)
        else:
            if frame.true_label is None:
                raise BackendError(
                    f"classifier stub needs a ground-truth label for frame {frame.frame_id!r} "
                    "(or configure fixed_label)"
                )
            rng = frame_rng(self.seed, frame.frame_id)
            pred = self._draw(self.confusion[int(frame.true_label)], rng)
        out = np.zeros(5, dtype=np.float64)
        out[pred] = _LOGIT_HIGH
        return out


# --- detector stub ----------------------------------------------------------

@dataclass(frozen=True)
class DetectorNoise:
    """Per-image error model applied to ground-truth boxes."""

    miss_rate: float = 0.0
    false_positive_rate: float = 0.0
    score: ScoreDist = field(default_factory=ScoreDist)

    def __post_init__(self) -> None:
        for name, v in (("miss_rate", self.miss_rate), ("false_positive_rate", self.false_positive_rate)):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0,1], got {v}")


PERFECT_DETECTOR = DetectorNoise()


class StubDetector:
    """Transforms a frame's ground-truth boxes through an error model.

    Each ground-truth box is dropped with probability miss_rate; one
    spurious box is added with probability false_positive_rate; scores
    come from the configured distribution.  `profiles` may override the
    default error model per true scenario label.  Frames without ground
    truth fall back to a deterministic `synthetic_count` grid scene.
    """

    thread_safe = True

    def __init__(self, kind: str = "body",
                 default: DetectorNoise = PERFECT_DETECTOR,
                 profiles: Optional[Mapping[ScenarioLabel, DetectorNoise]] = None,
                 seed: int = 0,
                 canvas: tuple[int, int] = DEFAULT_CANVAS,
                 synthetic_count: Optional[int] = None):
        if kind not in ("body", "head"):
            raise ValueError(f"detector kind must be body or head, got {kind!r}")
        self.kind = kind
        self.default = default
        self.profiles = dict(profiles or {})
        self.seed = seed
        self.canvas = canvas
        self.synthetic_count = synthetic_count

    def _noise_for(self, frame: Frame) -> DetectorNoise:
        if frame.true_label is not None and frame.true_label in self.profiles:
            return self.profiles[frame.true_label]
        return self.default

    def _ground_truth(self, frame: Frame) -> list[BBox]:
        if frame.truth is not None:
            return boxes_from_annotation(frame.truth, self.canvas)
        if self.synthetic_count is not None:
            return grid_boxes(self.synthetic_count, self.canvas)
        raise BackendError(
            f"detector stub needs ground truth for frame {frame.frame_id!r} "
            "(or configure synthetic_count)"
        )

    def detect(self, frame: Frame) -> list[Detection]:
        noise = self._noise_for(frame)
        boxes = self._ground_truth(frame)
        rng = frame_rng(self.seed, frame.frame_id)
        out: list[Detection] = []
        for box in boxes:
            if rng.random() < noise.miss_rate:
                continue
            out.append(Detection(box=box, score=noise.score.sample(rng), kind=self.kind))
        if rng.random() < noise.false_positive_rate:
            w, h = self.canvas
            bw, bh = rng.uniform(16, 64), rng.uniform(16, 64)
            x = rng.uniform(0, max(1.0, w - bw))
            y = rng.uniform(0, max(1.0, h - bh))
            out.append(Detection(box=BBox(x, y, x + bw, y + bh),
                                 score=noise.score.sample(rng), kind=self.kind))
        return out


# --- density stub -----------------------------------------------------------

@dataclass(frozen=True)
class DensityNoise:
    """Mass perturbation: mass = gt*(1+N(0,rel_sigma)) + bias + N(0,abs_sigma)."""

    rel_sigma: float = 0.0
    abs_sigma: float = 0.0
    bias: float = 0.0

    def __post_init__(self) -> None:
        if self.rel_sigma < 0.0 or self.abs_sigma < 0.0:
            raise ValueError("noise sigmas must be non-negative")


PERFECT_DENSITY = DensityNoise()


class StubDensity:
    """Emits a uniform map with a controlled total mass.

    Constant-mass mode (`mass` set) ignores the frame entirely; oracle
    mode derives the mass from the frame's ground-truth count through the
    noise profile (per-scenario overrides supported).
    """

    thread_safe = True

    def __init__(self, mass: Optional[float] = None,
                 default: DensityNoise = PERFECT_DENSITY,
                 profiles: Optional[Mapping[ScenarioLabel, DensityNoise]] = None,
                 seed: int = 0,
                 map_shape: tuple[int, int] = (64, 64)):
        if mass is not None and mass < 0.0:
            raise ValueError(f"constant mass must be non-negative, got {mass}")
        if map_shape[0] < 1 or map_shape[1] < 1:
            raise ValueError(f"map shape must be at least 1x1, got {map_shape}")
        self.mass = mass
        self.default = default
        self.profiles = dict(profiles or {})
        self.seed = seed
        self.map_shape = map_shape

    def _noise_for(self, frame: Frame) -> DensityNoise:
        if frame.true_label is not None and frame.true_label in self.profiles:
            return self.profiles[frame.true_label]
        return self.default

    def density(self, frame: Frame) -> DensityMap:
        if self.mass is not None:
            mass = self.mass
        else:
            if frame.truth is None:
                raise BackendError(
                    f"density stub needs ground truth for frame {frame.frame_id!r} "
                    "(or configure a constant mass)"
                )
            gt = count_of_annotation(frame.truth)
            noise = self._noise_for(frame)
            rng = frame_rng(self.seed, frame.frame_id)
            mass = gt * (1.0 + rng.gauss(0.0, noise.rel_sigma)) if noise.rel_sigma else float(gt)
            mass += noise.bias
            if noise.abs_sigma:
                mass += rng.gauss(0.0, noise.abs_sigma)
            mass = max(0.0, mass)
        h, w = self.map_shape
        return DensityMap(np.full((h, w), mass / (h * w), dtype=np.float64))
