"""Classifier frontend: preprocessing, softmax, argmax, label mapping.

The backend only maps a preprocessed tensor to 5 raw logits; everything
around it (resize, normalization, softmax, tie rule) lives here so
exchange files may export either logits or probabilities.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .domain import Frame, ScenarioLabel, NUM_SCENARIOS

INPUT_SIZE = 224

# conventional ImageNet statistics; real exported weights ship their own in config
DEFAULT_MEAN = (0.485, 0.456, 0.406)
DEFAULT_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class PreprocessConfig:
    mean: tuple[float, float, float] = DEFAULT_MEAN
    std: tuple[float, float, float] = DEFAULT_STD


@dataclass(frozen=True)
class ClassifierOutput:
    probs: tuple[float, ...]
    label: ScenarioLabel


def preprocess(image: np.ndarray, cfg: PreprocessConfig | None = None) -> np.ndarray:
    """Bilinear resize to 224x224 (aspect ratio not preserved), scale to
    [0,1], then per-channel mean/std normalization.  Returns HxWx3 float32."""
    cfg = cfg or PreprocessConfig()
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an HxWx3 RGB image, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"image has a zero dimension: {arr.shape}")
    im = Image.fromarray(arr.astype(np.uint8), "RGB")
    if im.size != (INPUT_SIZE, INPUT_SIZE):
        im = im.resize((INPUT_SIZE, INPUT_SIZE), Image.BILINEAR)
    x = np.asarray(im, dtype=np.float32) / 255.0
    mean = np.asarray(cfg.mean, dtype=np.float32)
    std = np.asarray(cfg.std, dtype=np.float32)
    return (x - mean) / std


def softmax(logits: np.ndarray) -> np.ndarray:
    """Max-shifted softmax over a 5-vector of finite logits."""
    arr = np.asarray(logits, dtype=np.float64).reshape(-1)
    if arr.shape[0] != NUM_SCENARIOS:
        raise ValueError(f"expected {NUM_SCENARIOS} logits, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"logits must be finite, got {arr.tolist()}")
    e = np.exp(arr - arr.max())
    return e / e.sum()


class ScenarioClassifier:
    """Preprocess + backend + softmax + argmax, with the lowest-code tie rule."""

    def __init__(self, backend, preprocess_cfg: PreprocessConfig | None = None,
                 output_is_probabilities: bool = False):
        self.backend = backend
        self.preprocess_cfg = preprocess_cfg or PreprocessConfig()
        self.output_is_probabilities = output_is_probabilities

    def classify(self, frame: Frame) -> ClassifierOutput:
        tensor = None
        if frame.image is not None:
            tensor = preprocess(frame.image, self.preprocess_cfg)
        raw = np.asarray(self.backend.logits(tensor, frame), dtype=np.float64).reshape(-1)
        if raw.shape[0] != NUM_SCENARIOS:
            raise ValueError(f"backend emitted {raw.shape[0]} values, expected {NUM_SCENARIOS}")
        if self.output_is_probabilities:
            if not np.all(np.isfinite(raw)) or raw.min() < -1e-9:
                raise ValueError(f"backend probabilities invalid: {raw.tolist()}")
            probs = np.clip(raw, 0.0, None)
            total = probs.sum()
            if abs(total - 1.0) > 1e-3:
                raise ValueError(f"backend probabilities sum to {total!r}, expected 1")
            probs = probs / total
        else:
            probs = softmax(raw)
        label = ScenarioLabel(int(np.argmax(probs)))  # argmax takes the lowest index on ties
        return ClassifierOutput(probs=tuple(float(p) for p in probs), label=label)
