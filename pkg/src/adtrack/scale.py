"""One-dimensional scale filter over a pyramid of target-sized samples (DSST style)."""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np

from .errors import InvalidConfig, InvalidInput
from .features.fhog import fhog
from .features.patch import crop_patch

Preprocess = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ScaleConfig:
    num_scales: int = 33
    step: float = 1.02
    sigma_factor: float = 0.25
    lam: float = 1e-2
    model_max_area: float = 512.0
    cell_size: int = 4

    def __post_init__(self):
        if self.num_scales < 1 or self.num_scales % 2 == 0:
            raise InvalidConfig(f"num_scales must be a positive odd number, got {self.num_scales}")
        if not self.step > 1:
            raise InvalidConfig(f"scale step must exceed 1, got {self.step}")
        if not (self.sigma_factor > 0 and self.lam > 0 and self.model_max_area > 0):
            raise InvalidConfig("sigma_factor, lam and model_max_area must be positive")

    @property
    def exponents(self) -> np.ndarray:
        return np.arange(self.num_scales) - self.num_scales // 2

    @property
    def factors(self) -> np.ndarray:
        return self.step ** self.exponents


@dataclass(frozen=True)
class ScaleFilterState:
    cfg: ScaleConfig
    num: np.ndarray  # (d, S) numerator, scale-DFT domain
    den: np.ndarray  # (S,) denominator
    base_size: tuple[float, float]  # target (w, h) at scale 1
    model_size: tuple[int, int]  # sample resolution (w, h)
    current_scale: float
    min_scale: float
    max_scale: float

    @property
    def num_scales(self) -> int:
        return self.cfg.num_scales

    @property
    def scale_step(self) -> float:
        return self.cfg.step

    @property
    def size(self) -> tuple[float, float]:
        return self.base_size[0] * self.current_scale, self.base_size[1] * self.current_scale


class ScaleEstimate(NamedTuple):
    multiplier: float
    low_confidence: bool
    response: np.ndarray | None
    features: np.ndarray | None = None  # (d, S) samples the estimate was computed from


@dataclass(frozen=True)
class _Tables:
    label_hat: np.ndarray
    window: np.ndarray


@lru_cache(maxsize=8)
def _tables(cfg: ScaleConfig) -> _Tables:
    sigma = cfg.sigma_factor * np.sqrt(cfg.num_scales)
    label = np.exp(-0.5 * cfg.exponents.astype(float) ** 2 / sigma**2)
    window = np.hanning(cfg.num_scales + 2)[1:-1] if cfg.num_scales > 1 else np.ones(1)
    return _Tables(np.fft.fft(label), window)


def model_size_for(size, cfg: ScaleConfig) -> tuple[int, int]:
    """Sample resolution: the target size shrunk to at most model_max_area pixels, at least two cells a side."""
    w, h = float(size[0]), float(size[1])
    factor = min(1.0, np.sqrt(cfg.model_max_area / (w * h)))
    lo = 2 * cfg.cell_size
    return max(int(np.floor(w * factor)), lo), max(int(np.floor(h * factor)), lo)


def scale_samples(frame, center, size, state_or_cfg, model_size=None,
                  preprocess: Preprocess | None = None) -> np.ndarray:
    """Stack of S target-sized samples at sizes a^k * size, resized to the model size: (S, h, w, 3)."""
    if isinstance(state_or_cfg, ScaleFilterState):
        cfg, model_size = state_or_cfg.cfg, state_or_cfg.model_size
    else:
        cfg = state_or_cfg
    out_w, out_h = model_size
    samples = []
    for f in cfg.factors:
        samples.append(crop_patch(frame, center, (size[0] * f, size[1] * f), 1.0, (out_w, out_h)))
    stack = np.stack(samples)
    if stack.dtype.kind != "f":
        stack = stack.astype(np.float32) * np.float32(1.0 / 255.0)
    if preprocess is not None:
        stack = preprocess(stack)
    return stack


def scale_features(stack: np.ndarray, cfg: ScaleConfig) -> np.ndarray:
    """(d, S) feature matrix: flattened fHOG of each sample, weighted by a Hann window over scales."""
    feats = fhog(stack, cfg.cell_size).reshape(stack.shape[0], -1)
    return (feats * _tables(cfg).window[:, None].astype(feats.dtype)).T


def _statistics(xs: np.ndarray, cfg: ScaleConfig):
    x_hat = np.fft.fft(xs.astype(np.float64), axis=1)
    num = _tables(cfg).label_hat[None, :] * np.conj(x_hat)
    den = np.sum((x_hat * np.conj(x_hat)).real, axis=0)
    return num, den


def _degenerate(size) -> bool:
    return min(size) <= 2


def scale_init(frame, center, size, cfg: ScaleConfig = ScaleConfig(),
               preprocess: Preprocess | None = None) -> ScaleFilterState:
    """Train the scale filter on the first frame."""
    if not (size[0] > 0 and size[1] > 0):
        raise InvalidInput(f"target size must be positive, got {size}")
    model_size = model_size_for(size, cfg)
    xs = scale_features(scale_samples(frame, center, size, cfg, model_size, preprocess), cfg)
    num, den = _statistics(xs, cfg)
    fh, fw = frame.shape[:2]
    min_scale = cfg.step ** np.ceil(np.log(max(5.0 / size[0], 5.0 / size[1])) / np.log(cfg.step))
    max_scale = cfg.step ** np.floor(np.log(min(fw / size[0], fh / size[1])) / np.log(cfg.step))
    return ScaleFilterState(cfg, num, den, (float(size[0]), float(size[1])), model_size, 1.0,
                            float(min(min_scale, 1.0)), float(max(max_scale, 1.0)))


def scale_detect(frame, center, size, state: ScaleFilterState,
                 preprocess: Preprocess | None = None) -> ScaleEstimate:
    """Multiplier a^k* of the best scale hypothesis around `size`."""
    cfg = state.cfg
    if cfg.num_scales == 1:
        return ScaleEstimate(1.0, False, None)
    if _degenerate(size):
        return ScaleEstimate(1.0, True, None)
    zs = scale_features(scale_samples(frame, center, size, state, preprocess=preprocess), cfg)
    z_hat = np.fft.fft(zs.astype(np.float64), axis=1)
    response = np.fft.ifft(np.sum(state.num * z_hat, axis=0) / (state.den + cfg.lam)).real
    best = int(np.argmax(response))
    flat = bool(np.ptp(response) == 0)
    return ScaleEstimate(1.0 if flat else float(cfg.factors[best]), flat, response, zs)


def scale_update(frame, center, size, state: ScaleFilterState, eta_s: float,
                 preprocess: Preprocess | None = None, features: np.ndarray | None = None) -> ScaleFilterState:
    """Blend the current-frame statistics into the accumulators with rate eta_s.

    `features` may carry the (d, S) samples already extracted at this centre and size.
    """
    if eta_s == 0:
        return state
    if _degenerate(size):
        return state
    xs = features
    if xs is None:
        xs = scale_features(scale_samples(frame, center, size, state, preprocess=preprocess), state.cfg)
    num, den = _statistics(xs, state.cfg)
    return replace(state, num=(1 - eta_s) * state.num + eta_s * num, den=(1 - eta_s) * state.den + eta_s * den)


def apply_multiplier(state: ScaleFilterState, multiplier: float) -> ScaleFilterState:
    """New state with the current scale multiplied and clamped to the representable range."""
    scale = float(np.clip(state.current_scale * multiplier, state.min_scale, state.max_scale))
    return replace(state, current_scale=scale)
