"""Backends that run serialized model files with the numpy executor.

Three adapters wrap the executor behind the backend protocols: a
classifier head (5 logits), a box detector (rows of x1,y1,x2,y2,score
in letterboxed input space), and a density head (single-channel map).
All are stateless between calls and safe to share across threads.
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from PIL import Image

from ..domain import BBox, DensityMap, Detection, Frame
from .base import BackendError, check_logits
from .onnx_exec import check_supported, run
from .onnx_io import OnnxModel, load_model

LETTERBOX_FILL = 114  # neutral gray used for letterbox padding


def _static_shape(model: OnnxModel, index: int = 0) -> Optional[list[Optional[int]]]:
    infos = model.graph.inputs
    feeds = [vi for vi in infos if vi.name not in model.graph.initializers]
    if index >= len(feeds):
        return None
    shape = feeds[index].shape
    if shape is None:
        return None
    return [d if isinstance(d, int) and d > 0 else None for d in shape]


def _feed_name(model: OnnxModel) -> str:
    feeds = [vi.name for vi in model.graph.inputs
             if vi.name not in model.graph.initializers]
    if len(feeds) != 1:
        raise BackendError(f"model must take exactly one input, found {len(feeds)}")
    return feeds[0]


def _resolve_layout(shape: Optional[list[Optional[int]]], declared: Optional[str]) -> str:
    if declared is not None:
        if declared not in ("nchw", "nhwc"):
            raise BackendError(f"layout must be nchw or nhwc, got {declared!r}")
        return declared
    if shape is not None and len(shape) == 4:
        if shape[1] == 3 or shape[1] == 1:
            return "nchw"
        if shape[3] == 3 or shape[3] == 1:
            return "nhwc"
    return "nchw"


def _input_hw(shape: Optional[list[Optional[int]]], layout: str,
              declared: Optional[tuple[int, int]]) -> Optional[tuple[int, int]]:
    if declared is not None:
        h, w = declared
        if h < 1 or w < 1:
            raise BackendError(f"input size must be positive, got {declared}")
        return h, w
    if shape is not None and len(shape) == 4:
        h, w = (shape[2], shape[3]) if layout == "nchw" else (shape[1], shape[2])
        if h is not None and w is not None:
            return int(h), int(w)
    return None


def _require_image(frame: Frame) -> np.ndarray:
    if frame.image is None:
        raise BackendError(f"frame {frame.frame_id!r} carries no pixels")
    return frame.image


def _batched(tensor: np.ndarray, layout: str) -> np.ndarray:
    # tensor arrives HxWx3 float32
    if layout == "nchw":
        tensor = np.transpose(tensor, (2, 0, 1))
    return tensor[np.newaxis].astype(np.float32)


class OnnxClassifierBackend:
    """Runs a 5-way classification graph on a preprocessed image tensor."""

    thread_safe = True

    def __init__(self, path: str, layout: Optional[str] = None):
        self.model = load_model(path)
        check_supported(self.model)
        self.input_name = _feed_name(self.model)
        shape = _static_shape(self.model)
        self.layout = _resolve_layout(shape, layout)
        out_shape = self.model.graph.outputs[0].shape
        if out_shape is not None:
            static = [d for d in out_shape if isinstance(d, int)]
            if static and static[-1] not in (5,):
                raise BackendError(
                    f"expected output dim 5, found {static[-1]}"
                )

    def logits(self, tensor: Optional[np.ndarray], frame: Frame) -> np.ndarray:
        if tensor is None:
            raise BackendError(f"frame {frame.frame_id!r} carries no pixels")
        outputs = run(self.model, {self.input_name: _batched(tensor, self.layout)})
        raw = np.asarray(outputs[0], dtype=np.float64).reshape(-1)
        return check_logits(raw, f"model {self.model.graph.name or 'classifier'}")


def letterbox(image: np.ndarray, target_hw: tuple[int, int]) -> tuple[np.ndarray, float, float, float]:
    """Resize keeping aspect ratio, pad with gray to target (h, w).

    Returns (canvas, scale, dx, dy) where original coords map to canvas
    coords as (x*scale + dx, y*scale + dy).
    """
    th, tw = target_hw
    h, w = image.shape[0], image.shape[1]
    scale = min(tw / w, th / h)
    new_w = max(1, int(round(w * scale)))
    new_h = max(1, int(round(h * scale)))
    resized = np.asarray(
        Image.fromarray(image).resize((new_w, new_h), Image.BILINEAR), dtype=np.uint8
    )
    canvas = np.full((th, tw, 3), LETTERBOX_FILL, dtype=np.uint8)
    dx = (tw - new_w) // 2
    dy = (th - new_h) // 2
    canvas[dy:dy + new_h, dx:dx + new_w] = resized
    return canvas, scale, float(dx), float(dy)


class OnnxDetectorBackend:
    """Runs a box-detection graph; rows are x1,y1,x2,y2,score in the
    letterboxed input frame, mapped back to source-image coordinates."""

    thread_safe = True

    def __init__(self, path: str, kind: str = "body",
                 layout: Optional[str] = None,
                 input_size: Optional[tuple[int, int]] = None):
        if kind not in ("body", "head"):
            raise BackendError(f"detector kind must be body or head, got {kind!r}")
        self.kind = kind
        self.model = load_model(path)
        check_supported(self.model)
        self.input_name = _feed_name(self.model)
        shape = _static_shape(self.model)
        self.layout = _resolve_layout(shape, layout)
        self.input_size = _input_hw(shape, self.layout, input_size)
        if self.input_size is None:
            raise BackendError(
                "detector input size is dynamic; pass input_size=(height, width)"
            )

    def detect(self, frame: Frame) -> list[Detection]:
        image = _require_image(frame)
        canvas, scale, dx, dy = letterbox(image, self.input_size)
        tensor = canvas.astype(np.float32) / 255.0
        outputs = run(self.model, {self.input_name: _batched(tensor, self.layout)})
        raw = np.asarray(outputs[0], dtype=np.float64)
        raw = raw.reshape(-1, raw.shape[-1]) if raw.size else raw.reshape(0, 5)
        if raw.shape[0] and raw.shape[1] != 5:
            raise BackendError(
                f"detector rows must have 5 values (x1,y1,x2,y2,score), found {raw.shape[1]}"
            )
        h, w = image.shape[0], image.shape[1]
        dets: list[Detection] = []
        for x1, y1, x2, y2, score in raw:
            if not np.isfinite([x1, y1, x2, y2, score]).all():
                continue
            box = BBox(
                x_min=(min(x1, x2) - dx) / scale,
                y_min=(min(y1, y2) - dy) / scale,
                x_max=(max(x1, x2) - dx) / scale,
                y_max=(max(y1, y2) - dy) / scale,
            ).clipped(w, h)
            dets.append(Detection(box=box, score=float(np.clip(score, 0.0, 1.0)),
                                  kind=self.kind))
        return dets


class OnnxDensityBackend:
    """Runs a density-regression graph; the output map is kept at the
    model's native resolution (total mass is resolution-independent)."""

    thread_safe = True

    def __init__(self, path: str, layout: Optional[str] = None,
                 input_size: Optional[tuple[int, int]] = None,
                 mean: Sequence[float] = (0.485, 0.456, 0.406),
                 std: Sequence[float] = (0.229, 0.224, 0.225)):
        self.model = load_model(path)
        check_supported(self.model)
        self.input_name = _feed_name(self.model)
        shape = _static_shape(self.model)
        self.layout = _resolve_layout(shape, layout)
        self.input_size = _input_hw(shape, self.layout, input_size)
        self.mean = np.asarray(mean, dtype=np.float32)
        self.std = np.asarray(std, dtype=np.float32)
        if self.mean.shape != (3,) or self.std.shape != (3,):
            raise BackendError("mean and std must each hold 3 values")
        if np.any(self.std == 0):
            raise BackendError("std values must be non-zero")

    def density(self, frame: Frame) -> DensityMap:
        image = _require_image(frame)
        if self.input_size is not None and image.shape[:2] != self.input_size:
            th, tw = self.input_size
            image = np.asarray(
                Image.fromarray(image).resize((tw, th), Image.BILINEAR), dtype=np.uint8
            )
        tensor = (image.astype(np.float32) / 255.0 - self.mean) / self.std
        outputs = run(self.model, {self.input_name: _batched(tensor, self.layout)})
        raw = np.asarray(outputs[0], dtype=np.float64)
        squeezed = np.squeeze(raw)
        if squeezed.ndim != 2:
            raise BackendError(
                f"density output must squeeze to 2-D, got shape {raw.shape}"
            )
        return DensityMap(squeezed)
