"""Deterministic synthetic sequences for tests and benchmarks.

Frames are uint8 RGB; boxes are 0-based (x, y, w, h) in pixels.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np


@dataclass
class SyntheticSequence:
    frames: list[np.ndarray]
    boxes: np.ndarray  # (n, 4)
    name: str = "synthetic"

    def __len__(self) -> int:
        return len(self.frames)

    def darkened(self, factor: float = 0.1) -> "SyntheticSequence":
        """Same sequence with every intensity multiplied by `factor`."""
        frames = [np.round(f.astype(np.float64) * factor).astype(np.uint8) for f in self.frames]
        return SyntheticSequence(frames, self.boxes.copy(), f"{self.name}_dark")


def correlated_noise(shape, rng: np.random.Generator, blur: float = 3.0, spread: float = 0.12) -> np.ndarray:
    """Smooth colour noise around mid-gray, float in [0, 1], shape (rows, cols, 3)."""
    noise = rng.standard_normal((shape[0], shape[1], 3)).astype(np.float32)
    noise = cv2.GaussianBlur(noise, (0, 0), blur)
    noise *= spread / max(float(noise.std()), 1e-6)
    return np.clip(0.5 + noise, 0.0, 1.0)


def textured_square(size: int, rng: np.random.Generator, detail: int = 4) -> np.ndarray:
    """High-contrast random texture, float (size, size, 3) in [0, 1]."""
    coarse = rng.random((detail, detail, 3)).astype(np.float32)
    tex = cv2.resize(coarse, (size, size), interpolation=cv2.INTER_CUBIC)
    fine = cv2.GaussianBlur(rng.standard_normal((size, size, 3)).astype(np.float32), (0, 0), 1.5)
    tex = tex + 0.25 * fine / max(float(fine.std()), 1e-6)
    tex[: max(size // 8, 1)] = 0.95  # a bright edge gives strong oriented gradients
    return np.clip(tex, 0.0, 1.0)


def _paste(frame: np.ndarray, patch: np.ndarray, x: int, y: int):
    h, w = patch.shape[:2]
    fh, fw = frame.shape[:2]
    x0, y0 = max(x, 0), max(y, 0)
    x1, y1 = min(x + w, fw), min(y + h, fh)
    if x1 > x0 and y1 > y0:
        frame[y0:y1, x0:x1] = patch[y0 - y : y1 - y, x0 - x : x1 - x]


def _to_uint8(img: np.ndarray) -> np.ndarray:
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def translating_square(n_frames: int = 60, frame_size=(320, 240), target: int = 40,
                       velocity=(3, 1), start=(40, 80), seed: int = 0) -> SyntheticSequence:
    """A textured square moving by an integer velocity (px/frame) over correlated noise."""
    rng = np.random.default_rng(seed)
    background = correlated_noise((frame_size[1], frame_size[0]), rng)
    tex = textured_square(target, rng)
    frames, boxes = [], []
    for k in range(n_frames):
        x, y = start[0] + velocity[0] * k, start[1] + velocity[1] * k
        frame = background.copy()
        _paste(frame, tex, x, y)
        frames.append(_to_uint8(frame))
        boxes.append((x, y, target, target))
    return SyntheticSequence(frames, np.array(boxes, dtype=np.float64), "translate")


def static_scene(n_frames: int = 10, frame_size=(240, 200), target: int = 40, seed: int = 1) -> SyntheticSequence:
    seq = translating_square(1, frame_size, target, (0, 0), ((frame_size[0] - target) // 2,
                                                              (frame_size[1] - target) // 2), seed)
    return SyntheticSequence([seq.frames[0].copy() for _ in range(n_frames)],
                             np.repeat(seq.boxes, n_frames, axis=0), "static")


def zooming_square(n_frames: int = 20, rate: float = 1.02, frame_size=(320, 240), target: int = 48,
                   seed: int = 2) -> SyntheticSequence:
    """A textured square growing by `rate` per frame about a fixed centre."""
    rng = np.random.default_rng(seed)
    background = correlated_noise((frame_size[1], frame_size[0]), rng)
    master = textured_square(4 * target, rng, detail=6)
    cx, cy = frame_size[0] / 2.0, frame_size[1] / 2.0
    frames, boxes = [], []
    for k in range(n_frames):
        side = target * rate**k
        n = int(round(side))
        tex = cv2.resize(master, (n, n), interpolation=cv2.INTER_AREA)
        x, y = int(round(cx - n / 2.0)), int(round(cy - n / 2.0))
        frame = background.copy()
        _paste(frame, tex, x, y)
        frames.append(_to_uint8(frame))
        boxes.append((cx - side / 2.0, cy - side / 2.0, side, side))
    return SyntheticSequence(frames, np.array(boxes), "zoom")


def hd_sequence(n_frames: int = 60, target: int = 80, seed: int = 3) -> SyntheticSequence:
    """1280x720 sequence with an ~80x80 target, for throughput measurements."""
    return translating_square(n_frames, (1280, 720), target, (4, 2), (200, 200), seed)


def write_sequence(seq: SyntheticSequence, root, name: str | None = None, attributes=()) -> Path:
    """Write `seq` as an OTB-style directory (img/0001.png, groundtruth_rect.txt) under `root`."""
    from .evaluation import write_results

    seq_dir = Path(root) / (name or seq.name)
    (seq_dir / "img").mkdir(parents=True, exist_ok=True)
    for k, frame in enumerate(seq.frames, 1):
        cv2.imwrite(str(seq_dir / "img" / f"{k:04d}.png"), cv2.cvtColor(frame, cv2.COLOR_RGB2BGR))
    write_results(seq_dir / "groundtruth_rect.txt", seq.boxes)
    if attributes:
        (seq_dir / "attributes.txt").write_text(",".join(attributes) + "\n")
    return seq_dir
