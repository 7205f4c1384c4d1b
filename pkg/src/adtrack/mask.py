"""Target-aware mask from the illuminance-change map (three-sigma rule on the target region)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidInput


class Rect(NamedTuple):
    """Axis-aligned integer rectangle: top-left corner (x, y), width, height."""

    x: int
    y: int
    w: int
    h: int

    @property
    def slices(self) -> tuple[slice, slice]:
        return slice(self.y, self.y + self.h), slice(self.x, self.x + self.w)


def centered_rect(shape: tuple[int, int], size: tuple[int, int]) -> Rect:
    """Rectangle of `size` (w, h) centred in a grid of `shape` (rows, cols), clipped to the grid."""
    rows, cols = shape
    w = int(min(max(size[0], 1), cols))
    h = int(min(max(size[1], 1), rows))
    return Rect(cols // 2 - w // 2, rows // 2 - h // 2, w, h)


@dataclass
class TargetAwareMask:
    raw: np.ndarray
    gated: np.ndarray
    mu: float
    sigma: float
    cell: np.ndarray | None = None


def generate_mask(theta: np.ndarray, crop: Rect, cell_size: int | None = None) -> TargetAwareMask:
    theta = np.asarray(theta, dtype=np.float64)
    if theta.ndim != 2:
        raise InvalidInput(f"theta must be 2-D, got shape {theta.shape}")
    crop = Rect(*crop)
    rows, cols = theta.shape
    if crop.w < 1 or crop.h < 1:
        raise InvalidInput(f"crop has zero area: {crop}")
    if crop.x < 0 or crop.y < 0 or crop.x + crop.w > cols or crop.y + crop.h > rows:
        raise InvalidInput(f"crop {crop} outside a {cols}x{rows} map")

    region = theta[crop.slices]
    mu = float(region.mean())
    sigma = float(region.std(ddof=1)) if region.size > 1 else 0.0
    # slack of a few ulps so constant regions (sigma ~ 0) stay inside the band
    slack = 16 * np.finfo(np.float64).eps * max(abs(mu), float(np.abs(region).max()))
    raw = (np.abs(theta - mu) <= 3.0 * sigma + slack).astype(np.uint8)
    gated = np.zeros_like(raw)
    gated[crop.slices] = raw[crop.slices]
    cell = downsample_mask(gated, cell_size) if cell_size else None
    return TargetAwareMask(raw, gated, mu, sigma, cell)


def downsample_mask(mask: np.ndarray, cell_size: int) -> np.ndarray:
    """Majority vote per cell (mean >= 0.5); trailing pixels that do not fill a cell are dropped."""
    rows, cols = mask.shape[0] // cell_size, mask.shape[1] // cell_size
    blocks = np.asarray(mask[: rows * cell_size, : cols * cell_size], dtype=np.float64)
    means = blocks.reshape(rows, cell_size, cols, cell_size).mean(axis=(1, 3))
    return (means >= 0.5).astype(np.uint8)
