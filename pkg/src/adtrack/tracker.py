"""Single-target tracker: day/night decision on the first frame, then per-frame
crop, (enhance), mask, features, fused detection, scale estimation and retraining."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dcf import (
    DAY_CONFIG,
    NIGHT_CONFIG,
    AdmmSchedule,
    AppearanceModel,
    DualFilter,
    Peak,
    ResponseMap,
    Support,
    TrainConfig,
    detect,
    gaussian_label,
    locate_peak,
    rfft2,
    train_dual_filters,
    update_model,
)
from .enhance import enhance as enhance_image
from .errors import InvalidConfig, InvalidInput
from .features import extract_features
from .features.patch import crop_patch, patch_region
from .illum import IlluminanceConfig, Mode, decide_mode
from .mask import centered_rect, downsample_mask, generate_mask
from .scale import ScaleConfig, ScaleFilterState, apply_multiplier, scale_detect, scale_init, scale_update

MODES = ("auto", "day", "night")


@dataclass(frozen=True)
class TrackerConfig:
    illum: IlluminanceConfig = IlluminanceConfig()
    day: TrainConfig = DAY_CONFIG
    night: TrainConfig = NIGHT_CONFIG
    mode: str = "auto"
    sc: float = 5.0  # search region / target size
    cell_size: int = 4
    max_cells: int = 2500  # cap on the feature grid area
    sigma_factor: float = 1.0 / 16
    scale: ScaleConfig = ScaleConfig()
    estimate_scale: bool = True
    admm: AdmmSchedule = AdmmSchedule()
    use_cn: bool = True
    enhance: bool = True  # enhance patches in night mode
    use_mask: bool = True  # False forces the mask to all ones
    window: bool = True
    dtype: str = "float32"

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidConfig(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.sc >= 1:
            raise InvalidConfig(f"sc must be >= 1, got {self.sc}")
        if self.cell_size < 1 or self.max_cells < 1:
            raise InvalidConfig("cell_size and max_cells must be positive")
        if not self.sigma_factor > 0:
            raise InvalidConfig(f"sigma_factor must be positive, got {self.sigma_factor}")
        if np.dtype(self.dtype) not in (np.float32, np.float64):
            raise InvalidConfig(f"dtype must be float32 or float64, got {self.dtype}")

    def params(self, mode: Mode) -> TrainConfig:
        return self.day if mode is Mode.DAY else self.night


@dataclass
class TrackState:
    position: tuple[float, float]  # target centre (x, y), 0-based pixel coordinates
    size: tuple[float, float]  # (w, h)
    mode: Mode
    frame_index: int
    low_confidence: bool = False
    peak: float = float("nan")

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        """(x, y, w, h) with (x, y) the top-left corner."""
        (cx, cy), (w, h) = self.position, self.size
        return cx - w / 2.0, cy - h / 2.0, w, h


@dataclass
class _Sample:
    x_g_hat: np.ndarray
    x_o_hat: np.ndarray
    origin: tuple[float, float]  # frame coordinates of the patch centre
    pixel_scale: tuple[float, float]  # frame pixels per model pixel (x, y)
    mask: np.ndarray  # cell mask used for the target stream
    pixel_mask: np.ndarray | None = None


@dataclass
class _Geometry:
    base_size: tuple[float, float]
    model_px: tuple[int, int]  # (w, h) of the resized search patch
    grid: tuple[int, int]  # (rows, cols) in cells
    target_cells: tuple[int, int]  # (rows, cols)
    target_model_px: tuple[int, int]  # (w, h)
    support: Support


def _as_frame(frame) -> np.ndarray:
    frame = np.asarray(frame)
    if frame.ndim == 2:
        frame = np.repeat(frame[..., None], 3, axis=2)
    if frame.ndim != 3 or frame.shape[2] != 3 or frame.size == 0:
        raise InvalidInput(f"expected an HxWx3 (or HxW) frame, got shape {frame.shape}")
    if frame.dtype.kind not in "uf":
        raise InvalidInput(f"unsupported frame dtype {frame.dtype}")
    return frame


def _to_float(pixels: np.ndarray, dtype) -> np.ndarray:
    if pixels.dtype.kind == "f":
        return pixels.astype(dtype, copy=False)
    scale = 1.0 / np.iinfo(pixels.dtype).max
    return pixels.astype(dtype) * dtype.type(scale)


class ADTracker:
    """Illumination-adaptive dual-filter tracker.

    >>> trk = ADTracker()
    >>> state = trk.init(frame0, (x, y, w, h))
    >>> state = trk.track(frame1)
    """

    def __init__(self, cfg: TrackerConfig = TrackerConfig()):
        self.cfg = cfg
        self._dtype = np.dtype(cfg.dtype)
        self._mode: Mode | None = None
        self.state: TrackState | None = None
        self.filters: DualFilter | None = None
        self.model: AppearanceModel | None = None
        self.scale_state: ScaleFilterState | None = None
        self.last_response: ResponseMap | None = None
        self.last_peak: Peak | None = None
        self.last_sample: _Sample | None = None
        self.l_tilde: float = float("nan")
        self._frame_shape = None
        self._geom: _Geometry | None = None
        self._label = None

    # -- public ---------------------------------------------------------------

    @property
    def mode(self) -> Mode | None:
        return self._mode

    @property
    def params(self) -> TrainConfig:
        if self._mode is None:
            raise RuntimeError("tracker not initialised")
        return self.cfg.params(self._mode)

    def init(self, frame, bbox) -> TrackState:
        frame = _as_frame(frame)
        x, y, w, h = (float(v) for v in bbox)
        if not (np.isfinite([x, y, w, h]).all() and w > 0 and h > 0):
            raise InvalidInput(f"bounding box must be finite with positive area, got {bbox}")
        fh, fw = frame.shape[:2]
        if x + w <= 0 or y + h <= 0 or x >= fw or y >= fh:
            raise InvalidInput(f"bounding box {bbox} does not overlap the {fw}x{fh} frame")

        decided, self.l_tilde = decide_mode(_to_float(frame, np.dtype(np.float64)), self.cfg.illum)
        self._mode = decided if self.cfg.mode == "auto" else Mode(self.cfg.mode)
        self._frame_shape = frame.shape
        self._geom = self._geometry((w, h))
        self._label = gaussian_label(self._geom.grid, self.cfg.sigma_factor, self._geom.target_cells,
                                     dtype=self._dtype)
        center = (x + w / 2.0, y + h / 2.0)

        sample = self._sample(frame, center, 1.0)
        self.model = AppearanceModel(sample.x_g_hat, sample.x_o_hat)
        self.filters = self._train()
        self.last_sample = sample
        if self.cfg.estimate_scale:
            self.scale_state = scale_init(frame, center, (w, h), self.cfg.scale, self._preprocess)
        self.state = TrackState(center, (w, h), self._mode, 0)
        return self.state

    def track(self, frame) -> TrackState:
        if self.state is None:
            raise RuntimeError("call init() before track()")
        frame = _as_frame(frame)
        if frame.shape != self._frame_shape:
            raise InvalidInput(f"frame shape changed from {self._frame_shape} to {frame.shape}")
        params = self.params
        scale = self._current_scale()

        search = self._sample(frame, self.state.position, scale)
        response = detect(self.filters, search.x_g_hat, search.x_o_hat, params.psi, fourier=True)
        peak = locate_peak(response)
        cell = self.cfg.cell_size
        cx = search.origin[0] + peak.dx * cell * search.pixel_scale[0]
        cy = search.origin[1] + peak.dy * cell * search.pixel_scale[1]
        fh, fw = frame.shape[:2]
        outside = not (0 <= cx <= fw - 1 and 0 <= cy <= fh - 1)
        center = (min(max(cx, 0.0), fw - 1.0), min(max(cy, 0.0), fh - 1.0))

        low_conf = peak.low_confidence or outside
        reuse = None
        if self.scale_state is not None:
            est = scale_detect(frame, center, self.scale_state.size, self.scale_state, self._preprocess)
            new_state = apply_multiplier(self.scale_state, est.multiplier)
            if new_state.current_scale == self.scale_state.current_scale:
                reuse = est.features  # same centre and size: the update sees identical samples
            self.scale_state = new_state
            scale = self.scale_state.current_scale
            low_conf = low_conf or est.low_confidence

        train = self._sample(frame, center, scale)
        self.model = update_model(self.model, train.x_g_hat, train.x_o_hat, params.eta_t)
        self.filters = self._train()
        if self.scale_state is not None:
            self.scale_state = scale_update(frame, center, self.scale_state.size, self.scale_state,
                                            params.eta_s, self._preprocess, features=reuse)

        base = self._geom.base_size
        self.last_response, self.last_peak, self.last_sample = response, peak, search
        self.state = TrackState(center, (base[0] * scale, base[1] * scale), self._mode,
                                self.state.frame_index + 1, low_conf, peak.value)
        return self.state

    # -- internals ------------------------------------------------------------

    def _current_scale(self) -> float:
        return 1.0 if self.scale_state is None else self.scale_state.current_scale

    def _geometry(self, size) -> _Geometry:
        cfg = self.cfg
        cell = cfg.cell_size
        region = (cfg.sc * size[0], cfg.sc * size[1])
        cells = (region[0] / cell) * (region[1] / cell)
        shrink = np.sqrt(cells / cfg.max_cells) if cells > cfg.max_cells else 1.0
        model_px = tuple(max(int(round(r / shrink / cell)), 1) * cell for r in region)
        grid = (model_px[1] // cell, model_px[0] // cell)
        target_px = (max(int(round(size[0] / shrink)), 1), max(int(round(size[1] / shrink)), 1))
        target_cells = (max(int(round(target_px[1] / cell)), 1), max(int(round(target_px[0] / cell)), 1))
        support = Support.centered(grid, target_cells)
        return _Geometry((float(size[0]), float(size[1])), model_px, grid,
                         (support.rows, support.cols), target_px, support)

    def _preprocess(self, stack: np.ndarray) -> np.ndarray:
        """Scale-sample preprocessing: enhancement in night mode."""
        if self._mode is Mode.NIGHT and self.cfg.enhance:
            return enhance_image(stack, self.cfg.illum).enhanced.astype(stack.dtype, copy=False)
        return stack

    def _sample(self, frame: np.ndarray, center, scale: float) -> _Sample:
        g, cfg = self._geom, self.cfg
        size = (g.base_size[0] * scale, g.base_size[1] * scale)
        region = patch_region(center, size, cfg.sc)
        pixels = crop_patch(frame, center, size, cfg.sc, g.model_px)
        patch = _to_float(pixels, self._dtype)

        night = self._mode is Mode.NIGHT and cfg.enhance
        theta = None
        if night or cfg.use_mask:
            # one enhancement of the raw patch yields both the night-mode
            # training image and the illuminance change used for the mask
            enh = enhance_image(patch, cfg.illum)
            theta = enh.theta
            if night:
                patch = enh.enhanced.astype(self._dtype, copy=False)

        feats = extract_features(patch, cfg.cell_size, use_cn=cfg.use_cn, window=cfg.window).data
        pixel_mask = None
        if cfg.use_mask:
            crop = centered_rect(theta.shape, g.target_model_px)
            pixel_mask = generate_mask(theta, crop).gated
            cells = downsample_mask(pixel_mask, cfg.cell_size)[: g.grid[0], : g.grid[1]]
        else:
            cells = np.ones(g.grid, dtype=np.uint8)
        x_g_hat = rfft2(feats)
        x_o_hat = x_g_hat if not cfg.use_mask else rfft2(feats * cells[..., None].astype(feats.dtype))

        origin = (region.x + region.w / 2.0, region.y + region.h / 2.0)
        pixel_scale = (region.w / g.model_px[0], region.h / g.model_px[1])
        return _Sample(x_g_hat, x_o_hat, origin, pixel_scale, cells, pixel_mask)

    def _train(self) -> DualFilter:
        return train_dual_filters(self.model.x_g, self.model.x_o, self._label, self.params,
                                  self._geom.support, self.cfg.admm, fourier=True)


def init(frame, bbox, cfg: TrackerConfig = TrackerConfig()) -> ADTracker:
    """Create a tracker handle initialised on the first frame."""
    trk = ADTracker(cfg)
    trk.init(frame, bbox)
    return trk


def track_frame(handle: ADTracker, frame) -> TrackState:
    return handle.track(frame)


def with_overrides(cfg: TrackerConfig, **changes) -> TrackerConfig:
    return replace(cfg, **changes)
