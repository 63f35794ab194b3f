"""Reference forward pass for the classifier fixture.

Computes the expected logits with its own numpy arithmetic (offset-sum
convolution rather than window gathering), so the recorded expectations
are an independent check on whatever runtime executes the graph.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .fixtures import ClassifierWeights


def preprocess_tensor(image: np.ndarray, mean: Sequence[float],
                      std: Sequence[float]) -> np.ndarray:
    """Scale a HxWx3 uint8 image to [0,1] and normalize per channel."""
    x = image.astype(np.float32) / 255.0
    return (x - np.asarray(mean, dtype=np.float32)) / np.asarray(std, dtype=np.float32)


def classifier_logits(tensor_hwc: np.ndarray, weights: ClassifierWeights) -> np.ndarray:
    """Conv(3x3, stride 2, pad 1, no bias) + Relu + global average + linear head."""
    x = np.transpose(tensor_hwc.astype(np.float32), (2, 0, 1))
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    out_edge = (xp.shape[1] - 3) // 2 + 1
    span = 2 * out_edge - 1
    acc = np.zeros((weights.conv.shape[0], out_edge, out_edge), dtype=np.float32)
    for dy in range(3):
        for dx in range(3):
            sl = xp[:, dy:dy + span:2, dx:dx + span:2]
            acc += np.einsum("chw,oc->ohw", sl, weights.conv[:, :, dy, dx]).astype(np.float32)
    features = np.maximum(acc, 0.0).mean(axis=(1, 2)).astype(np.float32)
    return (weights.head_w @ features + weights.head_b).astype(np.float32)


def softmax(logits: np.ndarray) -> np.ndarray:
    arr = np.asarray(logits, dtype=np.float64).reshape(-1)
    e = np.exp(arr - arr.max())
    return e / e.sum()
