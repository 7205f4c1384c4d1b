"""Low-light enhancement by global log tone mapping, and the illuminance-change map used for masking.

Functions accept a single HxWx3 image or a stack of them (...xHxWx3); statistics
(log-average luminance, maximum luminance) are then taken per image.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput, InvalidInput
from .illum import IlluminanceConfig, world_illuminance


@dataclass
class Enhancement:
    enhanced: np.ndarray  # clipped to [0, 1]
    l_w: np.ndarray
    l_g: np.ndarray
    l_tilde: np.ndarray | float
    theta: np.ndarray
    degenerate: bool = False


def _log_average(l_w: np.ndarray, delta: float) -> np.ndarray:
    return np.exp(np.mean(np.log(delta + l_w), axis=(-2, -1)))


def global_adaptation(l_w: np.ndarray, l_tilde) -> np.ndarray:
    """log(L/L~ + 1) / log(L_max/L~ + 1), with L_max taken per image."""
    l_w = np.asarray(l_w)
    if l_w.size == 0:
        raise InvalidInput("empty luminance map")
    l_tilde = np.asarray(l_tilde, dtype=l_w.dtype)
    if np.any(l_tilde <= 0):
        raise InvalidInput("log-average luminance must be positive")
    l_max = l_w.max(axis=(-2, -1))
    if np.any(l_max <= 0):
        raise DegenerateInput("luminance is zero everywhere")
    lt = l_tilde[..., None, None]
    return np.log1p(l_w / lt) / np.log1p(l_max / l_tilde)[..., None, None]


def enhance_image(image: np.ndarray, l_w: np.ndarray, l_g: np.ndarray, clip: bool = True) -> np.ndarray:
    """Scale every channel of each pixel by l_g / l_w; black pixels pass through."""
    image = np.asarray(image)
    if image.shape[:-1] != np.shape(l_w) or np.shape(l_w) != np.shape(l_g):
        raise InvalidInput(f"shape mismatch: image {image.shape}, maps {np.shape(l_w)} / {np.shape(l_g)}")
    lit = l_w > 0
    gain = np.divide(l_g, l_w, out=np.ones_like(l_g), where=lit)
    out = image * gain[..., None]
    if clip:
        np.clip(out, 0.0, 1.0, out=out)
    return out


def enhance(image: np.ndarray, cfg: IlluminanceConfig = IlluminanceConfig()) -> Enhancement:
    """Full enhancement record for an image (or stack). All-black images come back unchanged, flagged degenerate."""
    l_w = world_illuminance(image, cfg)
    l_tilde = _log_average(l_w, cfg.delta)
    l_max = l_w.max(axis=(-2, -1))
    dark = l_max <= 0
    if np.all(dark):
        return Enhancement(np.array(image, copy=True), l_w, np.zeros_like(l_w), l_tilde,
                           np.zeros_like(l_w), degenerate=True)
    if np.any(dark):
        # mixed stack: black images get a unit max; their pixels are zero either way
        l_max_safe = np.where(dark, 1.0, l_max)
        l_g = np.log1p(l_w / l_tilde[..., None, None]) / np.log1p(l_max_safe / l_tilde)[..., None, None]
    else:
        l_g = global_adaptation(l_w, l_tilde)
    raw = enhance_image(image, l_w, l_g, clip=False)
    # theta from the unclipped result; clipping only matters for display/features
    theta = l_w - world_illuminance(raw, cfg)
    enhanced = np.clip(raw, 0.0, 1.0, out=raw)
    return Enhancement(enhanced, l_w, l_g, l_tilde, theta, degenerate=bool(np.any(dark)))


def illuminance_change(image: np.ndarray, cfg: IlluminanceConfig = IlluminanceConfig()) -> np.ndarray:
    """L^W(image) - L^W(enhanced image). Zero everywhere for an all-black image (see `enhance` for the flag)."""
    return enhance(image, cfg).theta
