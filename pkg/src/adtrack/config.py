"""Flat ``key = value`` configuration files mirroring the command-line flags.

Example::

    # comments start with '#'
    mode = auto
    tau = 0.15
    mu = 280          # both parameter profiles
    night.mu = 200    # night profile only
    eta-t = 0.03
    enhance = yes

Training keys (lambda, mu, psi, eta-t, eta-s) without a prefix set both the day and
the night profile; a ``day.`` or ``night.`` prefix targets one profile. Within a
single source, unprefixed keys are applied before prefixed ones.
"""
from __future__ import annotations

import re
from dataclasses import replace
from pathlib import Path

from .errors import FormatError, InvalidConfig
from .tracker import TrackerConfig

TRAIN_KEYS = {"lambda": "lam", "mu": "mu", "psi": "psi", "eta-t": "eta_t", "eta-s": "eta_s"}
ILLUM_KEYS = {"tau": "tau", "delta": "delta", "alpha-r": "alpha_r", "alpha-g": "alpha_g", "alpha-b": "alpha_b"}
TRACKER_KEYS = {"cells": ("cell_size", int), "sc": ("sc", float), "max-cells": ("max_cells", int)}
BOOL_KEYS = {"enhance": "enhance", "mask": "use_mask", "scale": "estimate_scale", "cn": "use_cn"}
PROFILES = ("day", "night")
_TRUE, _FALSE = {"1", "true", "yes", "on"}, {"0", "false", "no", "off"}
_LINE = re.compile(r"^\s*([A-Za-z][\w.\-]*)\s*[=:]\s*(.*?)\s*$")


def known_keys() -> list[str]:
    keys = ["mode", *ILLUM_KEYS, *TRACKER_KEYS, *BOOL_KEYS, *TRAIN_KEYS]
    keys += [f"{p}.{k}" for p in PROFILES for k in TRAIN_KEYS]
    return keys


def _convert(key: str, raw: str, source: str):
    base = key.split(".", 1)[-1]
    if key == "mode":
        return raw.lower()
    if base in BOOL_KEYS:
        low = raw.lower()
        if low in _TRUE or low in _FALSE:
            return low in _TRUE
        raise FormatError(f"{source}: {key} expects a boolean, got {raw!r}")
    kind = TRACKER_KEYS[base][1] if base in TRACKER_KEYS else float
    try:
        return kind(raw)
    except ValueError:
        raise FormatError(f"{source}: {key} expects a number, got {raw!r}") from None


def parse_config(text: str, source: str = "<config>") -> dict:
    """Parse config text into {key: typed value}; unknown keys and bad lines raise FormatError."""
    known = set(known_keys())
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0]
        if not line.strip():
            continue
        m = _LINE.match(line)
        if not m:
            raise FormatError(f"{source}:{lineno}: expected 'key = value', got {line.strip()!r}")
        key, raw = m.group(1).lower().replace("_", "-"), m.group(2)
        if key not in known:
            raise FormatError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = _convert(key, raw, f"{source}:{lineno}")
    return values


def load_config(path) -> dict:
    path = Path(path)
    return parse_config(path.read_text(), str(path))


def apply_config(values: dict, base: TrackerConfig = TrackerConfig()) -> TrackerConfig:
    """Overlay parsed values on `base`. Raises InvalidConfig for out-of-range values."""
    cfg = base
    if "mode" in values:
        cfg = replace(cfg, mode=values["mode"])
    illum = {ILLUM_KEYS[k]: v for k, v in values.items() if k in ILLUM_KEYS}
    if illum:
        cfg = replace(cfg, illum=replace(cfg.illum, **illum))
    tracker = {TRACKER_KEYS[k][0]: v for k, v in values.items() if k in TRACKER_KEYS}
    tracker.update({BOOL_KEYS[k]: v for k, v in values.items() if k in BOOL_KEYS})
    if tracker:
        cfg = replace(cfg, **tracker)
    shared = {TRAIN_KEYS[k]: v for k, v in values.items() if k in TRAIN_KEYS}
    for profile in PROFILES:
        own = {TRAIN_KEYS[k.split(".", 1)[1]]: v for k, v in values.items() if k.startswith(profile + ".")}
        changes = {**shared, **own}
        if changes:
            cfg = replace(cfg, **{profile: replace(getattr(cfg, profile), **changes)})
    return cfg


def resolve_config(file_values: dict | None = None, flag_values: dict | None = None,
                   base: TrackerConfig = TrackerConfig()) -> TrackerConfig:
    """Defaults, then the config file, then command-line flags (highest precedence)."""
    cfg = apply_config(file_values or {}, base)
    return apply_config(flag_values or {}, cfg)


__all__ = ["InvalidConfig", "apply_config", "known_keys", "load_config", "parse_config", "resolve_config"]
