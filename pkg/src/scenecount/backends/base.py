"""Backend contracts shared by stub and exchange-file implementations.

A backend is an opaque inference function.  Handles declare whether they
are safe to call from multiple threads; the pipeline serializes calls to
any handle that is not.
"""
from __future__ import annotations

from typing import Optional, Protocol, runtime_checkable

import numpy as np

from ..domain import DensityMap, Detection, Frame


class BackendError(RuntimeError):
    """Structured backend failure (load or inference)."""


@runtime_checkable
class ClassifierBackend(Protocol):
    thread_safe: bool

    def logits(self, tensor: Optional[np.ndarray], frame: Frame) -> np.ndarray:
        """Map a preprocessed 224x224x3 tensor to 5 raw logits.

        Stub implementations ignore the tensor and key off the frame.
        """
        ...


@runtime_checkable
class DetectorBackend(Protocol):
    thread_safe: bool
    kind: str  # body | head

    def detect(self, frame: Frame) -> list[Detection]:
        """Decoded, pre-NMS scored boxes for the frame."""
        ...


@runtime_checkable
class DensityBackend(Protocol):
    thread_safe: bool

    def density(self, frame: Frame) -> DensityMap:
        """Estimated density map, possibly downscaled relative to the input."""
        ...


def check_logits(raw, where: str) -> np.ndarray:
    """Exactly 5 finite logits or a structured error, never a partial result."""
    arr = np.asarray(raw, dtype=np.float64).reshape(-1)
    if arr.shape[0] != 5:
        raise BackendError(f"{where}: expected output dim 5, found {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise BackendError(f"{where}: non-finite logits {arr.tolist()}")
    return arr
