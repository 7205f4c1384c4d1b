"""Color Names: RGB -> 10-d colour descriptor through a 32x32x32 lookup table.

Asset layout (``data/colornames_w2c.f32``): 32768 x 10 little-endian float32,
row index ``r + 32*g + 1024*b`` where r, g, b = floor(channel_0_255 / 8).
This is the projected 10-dimensional Color Names table used by the CN/KCF
family of trackers (the copy shipped with OpenCV's tracking module); entries
are not restricted to [0, 1].
"""
from __future__ import annotations

import warnings
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import MissingAsset

N_CHANNELS = 10
TABLE_ROWS = 32 * 32 * 32
ASSET_NAME = "colornames_w2c.f32"


def load_table(path: str | Path | None = None) -> np.ndarray:
    """Load the (32768, 10) table. Raises MissingAsset if absent or truncated."""
    if path is None:
        ref = resources.files("adtrack") / "data" / ASSET_NAME
        if not ref.is_file():
            raise MissingAsset(f"Color Names table not found: {ref}")
        raw = ref.read_bytes()
    else:
        path = Path(path)
        if not path.is_file():
            raise MissingAsset(f"Color Names table not found: {path}")
        raw = path.read_bytes()
    table = np.frombuffer(raw, dtype="<f4")
    if table.size != TABLE_ROWS * N_CHANNELS:
        raise MissingAsset(f"Color Names table has {table.size} entries, expected {TABLE_ROWS * N_CHANNELS}")
    return table.reshape(TABLE_ROWS, N_CHANNELS)


@lru_cache(maxsize=1)
def default_table() -> np.ndarray | None:
    """The packaged table, or None (with a warning) if it cannot be loaded."""
    try:
        return load_table()
    except MissingAsset as exc:
        warnings.warn(f"{exc}; falling back to fHOG + grayscale features", RuntimeWarning, stacklevel=2)
        return None


def color_index(image: np.ndarray) -> np.ndarray:
    """Quantised table row per pixel of an (..., H, W, 3) RGB image in [0, 1]."""
    q = (np.clip(image, 0.0, 1.0) * 255.0).astype(np.intp) >> 3
    return q[..., 0] + 32 * q[..., 1] + 1024 * q[..., 2]


def color_names(image: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Per-pixel descriptors, shape (..., H, W, 10)."""
    return np.take(table, color_index(image), axis=0)
