"""Patch sampling with edge replication.

Pixel (i, j) of a frame covers the continuous square [j, j+1) x [i, i+1), so a
region of width W centred at x spans [x - W/2, x + W/2). Regions are sampled
bilinearly at sub-pixel precision; a region that is pixel-aligned and not
resized is copied directly.
"""
from __future__ import annotations

import warnings
from typing import NamedTuple

import cv2
import numpy as np

from ..errors import InvalidInput


class Region(NamedTuple):
    """Continuous frame region: top-left (x, y) and size (w, h) in pixels."""

    x: float
    y: float
    w: float
    h: float

    @property
    def center(self) -> tuple[float, float]:
        return self.x + self.w / 2.0, self.y + self.h / 2.0


def patch_region(center, size, sc: float = 1.0) -> Region:
    """Region of size sc*size (w, h) centred at `center` (x, y)."""
    w, h = sc * float(size[0]), sc * float(size[1])
    return Region(float(center[0]) - w / 2.0, float(center[1]) - h / 2.0, w, h)


def crop_patch(frame: np.ndarray, center, size, sc: float = 1.0, out_size=None) -> np.ndarray:
    """Sample the region sc*size (w, h) around `center` (x, y), replicating border pixels.

    The result has `out_size` (w, h), by default the region size rounded to
    whole pixels. A centre outside the frame is clamped onto it with a warning.
    """
    if sc < 1:
        raise InvalidInput(f"scale factor must be >= 1, got {sc}")
    if not (size[0] > 0 and size[1] > 0):
        raise InvalidInput(f"patch size must be positive, got {size}")
    return crop_region(frame, patch_region(_clamp_center(frame, center), size, sc), out_size)


def _clamp_center(frame, center):
    fh, fw = frame.shape[:2]
    cx = min(max(float(center[0]), 0.0), fw - 1.0)
    cy = min(max(float(center[1]), 0.0), fh - 1.0)
    if (cx, cy) != (float(center[0]), float(center[1])):
        warnings.warn(f"patch centre {tuple(center)} outside the frame, clamped to {(cx, cy)}", stacklevel=3)
    return cx, cy


def crop_region(frame: np.ndarray, region, out_size=None) -> np.ndarray:
    """Sample an explicit region (which may extend past the border) to `out_size` (w, h)."""
    x, y, w, h = (float(v) for v in region)
    if out_size is None:
        out_size = (max(int(round(w)), 1), max(int(round(h)), 1))
    ow, oh = int(out_size[0]), int(out_size[1])
    if ow < 1 or oh < 1:
        raise InvalidInput(f"output size must be positive, got {out_size}")
    sx, sy = w / ow, h / oh
    if sx == 1.0 and sy == 1.0 and x == int(x) and y == int(y):
        return _copy(frame, int(x), int(y), ow, oh)
    # output pixel u samples the continuous point x + (u + 0.5) * sx, i.e. index minus 0.5
    m = np.array([[sx, 0.0, x + 0.5 * sx - 0.5], [0.0, sy, y + 0.5 * sy - 0.5]])
    return cv2.warpAffine(frame, m, (ow, oh), flags=cv2.INTER_LINEAR | cv2.WARP_INVERSE_MAP,
                          borderMode=cv2.BORDER_REPLICATE)


def _copy(frame: np.ndarray, x0: int, y0: int, w: int, h: int) -> np.ndarray:
    fh, fw = frame.shape[:2]
    if x0 >= 0 and y0 >= 0 and x0 + w <= fw and y0 + h <= fh:
        return np.array(frame[y0 : y0 + h, x0 : x0 + w], copy=True)
    rows = np.clip(np.arange(y0, y0 + h), 0, fh - 1)
    cols = np.clip(np.arange(x0, x0 + w), 0, fw - 1)
    return frame[rows[:, None], cols[None, :]]
