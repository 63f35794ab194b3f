"""Fixture parameters and the deterministic values derived from them.

Everything downstream (graph weights, detector rows, density map,
canonical inputs) is a pure function of the FixtureSpec, keyed by
independent seed streams so the families do not share randomness.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

FAMILIES = ("classifier", "detector", "density")

NUM_CLASSES = 5          # classifier head width, fixed by the consumer contract
CONV_CHANNELS = 8
CLASSIFIER_EDGE = 224    # classifier graphs declare a 224x224x3 input
CANVAS_EDGE = 64         # detector and density graphs declare 64x64x3
GRID = 3                 # detector boxes are placed on a GRID x GRID cell layout

LOW_SCORE = 0.3          # below the 0.6 confidence floor, always filtered
DUPLICATE_GAP = 0.04     # duplicate box scores this far under its original

# seed-stream keys, so each derived value draws from its own stream
_STREAM_WEIGHTS = 0
_STREAM_ROWS = 1
_STREAM_CANONICAL = 2


@dataclass(frozen=True)
class FixtureSpec:
    family: str
    seed: int = 0
    max_boxes: int = 6                    # detector rows, two of them decoys
    map_shape: tuple[int, int] = (16, 16)  # density map height x width
    mass: float = 1.5                     # density map total mass

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(
                f"unsupported family {self.family!r}; expected one of {', '.join(FAMILIES)}"
            )
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed!r}")
        if not 3 <= self.max_boxes <= GRID * GRID + 1:
            raise ValueError(
                f"max_boxes must be in [3, {GRID * GRID + 1}], got {self.max_boxes}"
            )
        h, w = self.map_shape
        if h < 1 or w < 1:
            raise ValueError(f"map_shape must be at least 1x1, got {self.map_shape}")
        if not math.isfinite(self.mass) or self.mass < 0:
            raise ValueError(f"mass must be finite and non-negative, got {self.mass}")


@dataclass(frozen=True)
class ClassifierWeights:
    conv: np.ndarray    # (CONV_CHANNELS, 3, 3, 3), no bias so zero input stays zero
    head_w: np.ndarray  # (NUM_CLASSES, CONV_CHANNELS)
    head_b: np.ndarray  # (NUM_CLASSES,)


def classifier_weights(seed: int) -> ClassifierWeights:
    rng = np.random.default_rng([seed, _STREAM_WEIGHTS])
    conv = rng.normal(0.0, 0.3, (CONV_CHANNELS, 3, 3, 3)).astype(np.float32)
    head_w = rng.normal(0.0, 0.8, (NUM_CLASSES, CONV_CHANNELS)).astype(np.float32)
    head_b = rng.uniform(-1.0, 1.0, NUM_CLASSES).astype(np.float32)
    return ClassifierWeights(conv=conv, head_w=head_w, head_b=head_b)


def detector_rows(spec: FixtureSpec) -> np.ndarray:
    """Constant (max_boxes, 5) rows of x1,y1,x2,y2,score on the 64x64 canvas.

    max_boxes - 2 rows are well-separated confident boxes; one row scores
    below the confidence floor; the last duplicates row 0 at a slightly
    lower score, so greedy overlap suppression removes exactly one box.
    """
    rng = np.random.default_rng([spec.seed, _STREAM_ROWS])
    cell = CANVAS_EDGE // GRID
    kept = spec.max_boxes - 2
    rows: list[list[float]] = []
    for i in range(kept + 1):  # the extra one is the low-score decoy
        r, c = divmod(i, GRID)
        x1 = c * cell + 2 + rng.uniform(0.0, 3.0)
        y1 = r * cell + 2 + rng.uniform(0.0, 3.0)
        w = rng.uniform(8.0, 12.0)
        h = rng.uniform(8.0, 12.0)
        score = rng.uniform(0.65, 0.95) if i < kept else LOW_SCORE
        rows.append([x1, y1, x1 + w, y1 + h, score])
    duplicate = list(rows[0])
    duplicate[4] = rows[0][4] - DUPLICATE_GAP
    rows.append(duplicate)
    return np.asarray(rows, dtype=np.float32)


def expected_detector_count(spec: FixtureSpec) -> int:
    return spec.max_boxes - 2


def density_values(spec: FixtureSpec) -> np.ndarray:
    """Constant (1, 1, H, W) map whose cells sum to the target mass."""
    h, w = spec.map_shape
    value = np.float32(spec.mass / (h * w))
    return np.full((1, 1, h, w), value, dtype=np.float32)


def density_mass(spec: FixtureSpec) -> float:
    """Total mass of the emitted map, summed the way consumers sum it
    (float64 accumulation over the float32 cells)."""
    return float(density_values(spec).astype(np.float64).sum())


def round_half_away_from_zero(x: float) -> int:
    if x >= 0:
        return int(math.floor(x + 0.5))
    return -int(math.floor(-x + 0.5))


def expected_density_count(spec: FixtureSpec) -> int:
    return max(0, round_half_away_from_zero(density_mass(spec)))


def canonical_images(spec: FixtureSpec) -> dict[str, np.ndarray]:
    """The three canonical test inputs, sized to the family's declared input."""
    edge = CLASSIFIER_EDGE if spec.family == "classifier" else CANVAS_EDGE
    rng = np.random.default_rng([spec.seed, _STREAM_CANONICAL])
    return {
        "zeros": np.zeros((edge, edge, 3), dtype=np.uint8),
        "gray": np.full((edge, edge, 3), 128, dtype=np.uint8),
        "noise": rng.integers(0, 256, (edge, edge, 3), dtype=np.uint8),
    }
