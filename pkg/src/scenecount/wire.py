"""Canonical JSON shapes shared by the CLI and the HTTP service.

Command line and service must emit byte-for-byte-comparable documents
for the same input, so both go through these functions.  Latency is
deliberately not part of the wire shape: it varies run to run and would
break the determinism contract.
"""
from __future__ import annotations

from .classifier import ClassifierOutput
from .domain import FrameError, FrameResult


def result_to_wire(result: FrameResult) -> dict:
    return {
        "id": result.frame_id,
        "label": result.label.tag,
        "probs": [float(p) for p in result.probs],
        "model": result.model_id,
        "count": result.count,
    }


def error_to_wire(error: FrameError) -> dict:
    return {
        "id": error.frame_id,
        "stage": error.stage,
        "error": error.message,
    }


def classification_to_wire(frame_id: str, out: ClassifierOutput) -> dict:
    return {
        "id": frame_id,
        "label": out.label.tag,
        "probs": [float(p) for p in out.probs],
    }
