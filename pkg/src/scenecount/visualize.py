"""Overlay rendering: detection boxes, density heatmaps, count stamps.

All functions take and return HxWx3 uint8 RGB arrays and never mutate
their input.  PNG encoding goes through encode_png so bytes are stable
for a given input (no timestamps or ancillary chunks are written).
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .density import BlurConfig, gaussian_blur_5x5
from .domain import (
    BoxArtifacts,
    DensityArtifacts,
    DensityMap,
    Detection,
    Frame,
    FrameResult,
)


@dataclass(frozen=True)
class RenderConfig:
    alpha: float = 0.5               # peak heatmap opacity
    line_width: int = 2
    body_color: tuple[int, int, int] = (0, 200, 80)
    head_color: tuple[int, int, int] = (0, 120, 255)
    font_size: int = 16
    margin: int = 8
    stroke_width: int = 2
    text_color: tuple[int, int, int] = (255, 255, 255)
    stroke_color: tuple[int, int, int] = (0, 0, 0)

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0,1], got {self.alpha}")
        if self.line_width < 1:
            raise ValueError(f"line_width must be at least 1, got {self.line_width}")
        if self.font_size < 8:
            raise ValueError(f"font_size must be at least 8, got {self.font_size}")
        if self.margin < 0 or self.stroke_width < 0:
            raise ValueError("margin and stroke_width must be non-negative")


def _check_image(image: np.ndarray) -> np.ndarray:
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise ValueError(
            f"expected an HxWx3 uint8 image, got shape {arr.shape} dtype {arr.dtype}"
        )
    return arr


def jet_colormap(v: np.ndarray) -> np.ndarray:
    """Map values in [0,1] to RGB in [0,1] on the classic blue-to-red ramp."""
    v = np.clip(np.asarray(v, dtype=np.float64), 0.0, 1.0)
    r = np.clip(1.5 - np.abs(4.0 * v - 3.0), 0.0, 1.0)
    g = np.clip(1.5 - np.abs(4.0 * v - 2.0), 0.0, 1.0)
    b = np.clip(1.5 - np.abs(4.0 * v - 1.0), 0.0, 1.0)
    return np.stack([r, g, b], axis=-1)


def render_boxes(image: np.ndarray, detections: Sequence[Detection],
                 cfg: Optional[RenderConfig] = None) -> np.ndarray:
    """Outline detections, clipped to the canvas; color is per kind."""
    cfg = cfg or RenderConfig()
    arr = _check_image(image)
    im = Image.fromarray(arr.copy())
    draw = ImageDraw.Draw(im)
    h, w = arr.shape[0], arr.shape[1]
    for det in detections:
        box = det.box.clipped(w, h)
        if box.area <= 0.0:
            continue
        color = cfg.head_color if det.kind == "head" else cfg.body_color
        draw.rectangle(
            (round(box.x_min), round(box.y_min), round(box.x_max), round(box.y_max)),
            outline=color, width=cfg.line_width,
        )
    return np.asarray(im)


def render_heatmap(image: np.ndarray, density: DensityMap,
                   cfg: Optional[RenderConfig] = None) -> np.ndarray:
    """Blend a color-mapped density over the image.

    The map is upscaled bilinearly to image size and normalized by its
    peak; per-pixel opacity is alpha * normalized value, so empty cells
    leave the image untouched and an all-zero map is a no-op.
    """
    cfg = cfg or RenderConfig()
    arr = _check_image(image)
    h, w = arr.shape[0], arr.shape[1]
    values = density.values
    peak = float(values.max())
    if peak <= 0.0:
        return arr.copy()
    field = Image.fromarray(values.astype(np.float32), mode="F")
    scaled = np.asarray(field.resize((w, h), Image.BILINEAR), dtype=np.float64)
    v = np.clip(scaled / peak, 0.0, 1.0)
    colors = jet_colormap(v) * 255.0
    a = (cfg.alpha * v)[..., np.newaxis]
    blended = (1.0 - a) * arr.astype(np.float64) + a * colors
    return np.clip(np.rint(blended), 0, 255).astype(np.uint8)


def _font(size: int):
    try:
        return ImageFont.load_default(size=size)
    except TypeError:  # older library versions: fixed-size bitmap font only
        return ImageFont.load_default()


def stamp_count(image: np.ndarray, count: int,
                cfg: Optional[RenderConfig] = None) -> np.ndarray:
    """Write the count in the bottom-left corner, white with a black
    stroke; the font shrinks until the text fits the image width."""
    cfg = cfg or RenderConfig()
    arr = _check_image(image)
    im = Image.fromarray(arr.copy())
    draw = ImageDraw.Draw(im)
    text = str(count)
    size = cfg.font_size
    font = _font(size)
    avail = im.width - 2 * cfg.margin
    while size > 8:
        bbox = draw.textbbox((0, 0), text, font=font, stroke_width=cfg.stroke_width)
        if bbox[2] - bbox[0] <= avail:
            break
        size -= 2
        font = _font(size)
    bbox = draw.textbbox((0, 0), text, font=font, stroke_width=cfg.stroke_width)
    x = cfg.margin - bbox[0]
    y = im.height - cfg.margin - bbox[3]
    draw.text((x, y), text, font=font, fill=cfg.text_color,
              stroke_width=cfg.stroke_width, stroke_fill=cfg.stroke_color)
    return np.asarray(im)


def render_result(frame: Frame, result: FrameResult,
                  cfg: Optional[RenderConfig] = None,
                  blur: Optional[BlurConfig] = None) -> np.ndarray:
    """Full overlay for one pipeline result.

    Box results get outlined detections; density results get the map
    blurred 5x5 then blended as a heatmap.  Both end with the count
    stamped bottom-left.
    """
    cfg = cfg or RenderConfig()
    if frame.image is None:
        raise ValueError(f"frame {frame.frame_id!r} carries no pixels to render on")
    art = result.artifacts
    if isinstance(art, BoxArtifacts):
        canvas = render_boxes(frame.image, art.detections, cfg)
    elif isinstance(art, DensityArtifacts):
        canvas = render_heatmap(frame.image, gaussian_blur_5x5(art.density, blur), cfg)
    else:
        canvas = _check_image(frame.image).copy()
    return stamp_count(canvas, result.count, cfg)


def encode_png(image: np.ndarray) -> bytes:
    """Serialize to PNG; identical input yields identical bytes."""
    buf = io.BytesIO()
    Image.fromarray(_check_image(image)).save(buf, format="PNG")
    return buf.getvalue()
