"""Scene illuminance: per-pixel world luminance, log-average luminance and the day/night decider."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig, InvalidInput


class Mode(str, enum.Enum):
    DAY = "day"
    NIGHT = "night"


@dataclass(frozen=True)
class IlluminanceConfig:
    alpha_r: float = 0.299
    alpha_g: float = 0.587
    alpha_b: float = 0.114
    delta: float = 1e-4
    tau: float = 0.15

    def __post_init__(self):
        alphas = (self.alpha_r, self.alpha_g, self.alpha_b)
        if min(alphas) < 0:
            raise InvalidConfig(f"channel weights must be non-negative, got {alphas}")
        if abs(sum(alphas) - 1.0) > 1e-12:
            raise InvalidConfig(f"channel weights must sum to 1, got {sum(alphas)!r}")
        if not self.delta > 0:
            raise InvalidConfig(f"delta must be positive, got {self.delta}")
        if not 0 < self.tau < 1:
            raise InvalidConfig(f"tau must lie in (0, 1), got {self.tau}")

    @property
    def weights(self) -> np.ndarray:
        return np.array([self.alpha_r, self.alpha_g, self.alpha_b])


def _check_image(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim < 3 or image.shape[-1] != 3:
        raise InvalidInput(f"expected an HxWx3 image or a stack of them, got shape {image.shape}")
    if image.size == 0:
        raise InvalidInput("empty image")
    return image


def world_illuminance(image: np.ndarray, cfg: IlluminanceConfig = IlluminanceConfig()) -> np.ndarray:
    """Weighted RGB sum per pixel. `image` is HxWx3 (or a stack ...xHxWx3) with intensities in [0, 1]."""
    image = _check_image(image)
    w = cfg.weights.astype(image.dtype if image.dtype.kind == "f" else np.float64)
    return image[..., 0] * w[0] + image[..., 1] * w[1] + image[..., 2] * w[2]


def log_average_luminance(lum: np.ndarray, delta: float = 1e-4) -> float:
    """exp(mean(log(delta + L))) over all pixels."""
    lum = np.asarray(lum, dtype=np.float64)
    if lum.size == 0:
        raise InvalidInput("empty luminance map")
    if not delta > 0:
        raise InvalidConfig("delta must be positive")
    return float(np.exp(np.mean(np.log(delta + lum))))


def classify_light(l_tilde: float, tau: float = 0.15) -> Mode:
    # boundary value counts as day
    return Mode.NIGHT if l_tilde < tau else Mode.DAY


def decide_mode(image: np.ndarray, cfg: IlluminanceConfig = IlluminanceConfig()) -> tuple[Mode, float]:
    """Run the decider on a full frame; returns the mode and the log-average luminance."""
    l_tilde = log_average_luminance(world_illuminance(image, cfg), cfg.delta)
    return classify_light(l_tilde, cfg.tau), l_tilde
