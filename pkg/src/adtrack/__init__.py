"""Illumination-adaptive dual correlation filter tracking for day and night footage."""
from .dcf import DAY_CONFIG, NIGHT_CONFIG, AdmmSchedule, TrainConfig
from .enhance import Enhancement, enhance
from .errors import (
    ADTrackError,
    DegenerateInput,
    FormatError,
    InvalidConfig,
    InvalidInput,
    MissingAsset,
    SolverWarning,
)
from .illum import IlluminanceConfig, Mode, decide_mode, log_average_luminance, world_illuminance
from .mask import TargetAwareMask, generate_mask
from .scale import ScaleConfig
from .tracker import ADTracker, TrackerConfig, TrackState, init, track_frame

__version__ = "0.1.0"

__all__ = [
    "ADTrackError", "ADTracker", "AdmmSchedule", "DAY_CONFIG", "DegenerateInput", "Enhancement", "FormatError",
    "IlluminanceConfig", "InvalidConfig", "InvalidInput", "MissingAsset", "Mode", "NIGHT_CONFIG", "ScaleConfig",
    "SolverWarning", "TargetAwareMask", "TrackState", "TrackerConfig", "TrainConfig", "decide_mode", "enhance",
    "generate_mask", "init", "log_average_luminance", "track_frame", "world_illuminance",
]
