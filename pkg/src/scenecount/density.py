"""Density-path postprocessing: sanitize, sum, round; blur for heatmaps.

The blur is strictly a visualization step.  Counting always happens on
the unblurred (but sanitized) map, at the backend's native resolution.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .domain import DensityMap, round_half_away_from_zero

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BlurConfig:
    sigma: float = 1.0
    kernel_size: int = 5  # fixed square kernel

    def __post_init__(self) -> None:
        if self.sigma <= 0.0:
            raise ValueError(f"blur sigma must be positive, got {self.sigma}")
        if self.kernel_size != 5:
            raise ValueError("kernel size is fixed at 5")


def sanitize(m: DensityMap) -> tuple[DensityMap, int]:
    """Clamp negative cells to zero; returns (clean map, #cells clamped)."""
    neg = m.values < 0.0
    clamped = int(neg.sum())
    if clamped == 0:
        return m, 0
    return DensityMap(np.where(neg, 0.0, m.values)), clamped


def count_density(m: DensityMap) -> int:
    """Total mass of the sanitized map, rounded half away from zero."""
    clean, clamped = sanitize(m)
    if clamped:
        log.warning("density map had %d negative cell(s) clamped to 0", clamped)
    return max(0, round_half_away_from_zero(clean.total_mass()))


def gaussian_kernel_1d(sigma: float, size: int = 5) -> np.ndarray:
    """Normalized 1-D Gaussian taps centered on the middle element."""
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    half = size // 2
    xs = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur_5x5(m: DensityMap, cfg: BlurConfig | None = None) -> DensityMap:
    """Separable 5-tap Gaussian blur with reflected borders.

    Borders are mirrored about the array edge including the edge cell
    (half-sample symmetric, the scipy.ndimage "reflect" convention).
    With a normalized kernel this preserves constants exactly and total
    mass to float precision; edge-including mirroring is what makes the
    mass balance exact even for support touching the border.
    """
    cfg = cfg or BlurConfig()
    k = gaussian_kernel_1d(cfg.sigma, cfg.kernel_size)
    half = cfg.kernel_size // 2
    padded = np.pad(m.values, half, mode="symmetric")
    # rows then columns; correlation == convolution for a symmetric kernel
    rows = sum(k[t] * padded[:, t:t + m.width] for t in range(cfg.kernel_size))
    cols = sum(k[t] * rows[t:t + m.height, :] for t in range(cfg.kernel_size))
    return DensityMap(cols)
