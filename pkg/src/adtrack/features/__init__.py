"""Handcrafted appearance features on a cell grid: fHOG, Color Names and grayscale."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import cv2
import numpy as np

from ..errors import InvalidInput
from . import colornames
from .fhog import fhog
from .patch import crop_patch, crop_region, patch_region

__all__ = [
    "FeatureMap",
    "extract_features",
    "feature_dim",
    "hann2d",
    "crop_patch",
    "crop_region",
    "patch_region",
    "fhog",
]

_LUMA = (0.299, 0.587, 0.114)
_USE_DEFAULT = object()


@dataclass
class FeatureMap:
    data: np.ndarray  # (rows, cols, D)
    cell_size: int

    @property
    def grid(self) -> tuple[int, int]:
        return self.data.shape[:2]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@lru_cache(maxsize=32)
def hann2d(rows: int, cols: int, dtype=np.float64) -> np.ndarray:
    win = np.outer(np.hanning(rows), np.hanning(cols)).astype(dtype)
    win.flags.writeable = False
    return win


def _cell_mean(x: np.ndarray, cell: int) -> np.ndarray:
    """Mean over each cell of an (H, W, K) map; leftover border pixels are dropped."""
    rows, cols = x.shape[0] // cell, x.shape[1] // cell
    x = np.ascontiguousarray(x[: rows * cell, : cols * cell])
    # area interpolation at an integer factor is the exact block mean
    out = cv2.resize(x, (cols, rows), interpolation=cv2.INTER_AREA)
    return out.reshape(rows, cols, x.shape[2])


def feature_dim(use_cn: bool = True) -> int:
    return 31 + (colornames.N_CHANNELS if use_cn else 0) + 1


def extract_features(patch: np.ndarray, cell_size: int = 4, use_cn: bool = True,
                     window: bool = True, cn_table=_USE_DEFAULT) -> FeatureMap:
    """fHOG (31) + Color Names (10) + zero-centred gray (1) per cell, optionally Hann-windowed.

    If the Color Names table is unavailable the CN block is dropped (D = 32).
    """
    patch = np.asarray(patch)
    if patch.ndim != 3 or patch.shape[2] != 3:
        raise InvalidInput(f"expected an HxWx3 patch, got {patch.shape}")
    if patch.shape[0] < cell_size or patch.shape[1] < cell_size:
        raise InvalidInput(f"patch {patch.shape[1]}x{patch.shape[0]} smaller than one {cell_size}px cell")
    if patch.dtype.kind != "f":
        patch = patch.astype(np.float64) / 255.0

    parts = [fhog(patch, cell_size)]
    if use_cn:
        table = colornames.default_table() if cn_table is _USE_DEFAULT else cn_table
        if table is not None:
            parts.append(_cell_mean(colornames.color_names(patch, table).astype(patch.dtype), cell_size))
    # luma written relative to blue: exact for neutral pixels (R = G = B)
    blue = patch[..., 2]
    gray = blue + _LUMA[0] * (patch[..., 0] - blue) + _LUMA[1] * (patch[..., 1] - blue)
    parts.append(_cell_mean(gray[..., None], cell_size) - 0.5)

    data = np.concatenate(parts, axis=-1)
    if window:
        data *= hann2d(*data.shape[:2], data.dtype)[..., None]
    return FeatureMap(data, cell_size)
