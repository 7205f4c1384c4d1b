import numpy as np
import pytest

from adtrack.errors import InvalidConfig, InvalidInput
from adtrack.features.patch import crop_patch
from adtrack.scale import (
    ScaleConfig,
    apply_multiplier,
    model_size_for,
    scale_detect,
    scale_features,
    scale_init,
    scale_samples,
    scale_update,
)
from adtrack.synthetic import static_scene, zooming_square


@pytest.fixture(scope="module")
def scene():
    seq = static_scene(2)
    x, y, w, h = seq.boxes[0]
    return seq.frames[0], (x + w / 2, y + h / 2), (w, h)


def test_config_defaults_and_validation():
    cfg = ScaleConfig()
    assert (cfg.num_scales, cfg.step) == (33, 1.02)
    assert cfg.factors[16] == 1.0 and cfg.factors[0] == pytest.approx(1.02**-16)
    with pytest.raises(InvalidConfig):
        ScaleConfig(num_scales=32)
    with pytest.raises(InvalidConfig):
        ScaleConfig(step=1.0)


def test_single_hypothesis(scene):
    frame, c, s = scene
    cfg = ScaleConfig(num_scales=1)
    state = scale_init(frame, c, s, cfg)
    est = scale_detect(frame, c, s, state)
    assert est.multiplier == 1.0 and not est.low_confidence


def test_degenerate_size(scene):
    frame, c, s = scene
    state = scale_init(frame, c, s)
    est = scale_detect(frame, c, (2.0, 30.0), state)
    assert est.multiplier == 1.0 and est.low_confidence
    with pytest.raises(InvalidInput):
        scale_init(frame, c, (0.0, 3.0))


def test_static_target_multiplier(scene):
    frame, c, s = scene
    state = scale_init(frame, c, s)
    est = scale_detect(frame, c, s, state)
    assert 1 / 1.02 <= est.multiplier <= 1.02


def test_eta_zero_and_one(scene):
    frame, c, s = scene
    state = scale_init(frame, c, s)
    assert scale_update(frame, c, s, state, 0.0) is state
    other = static_scene(1, seed=9).frames[0]
    fresh = scale_init(other, c, s)
    updated = scale_update(other, c, s, state, 1.0)
    np.testing.assert_allclose(updated.num, fresh.num, rtol=1e-12)
    np.testing.assert_allclose(updated.den, fresh.den, rtol=1e-12)


def test_accumulators_converge_monotonically(scene):
    frame, c, s = scene
    other = static_scene(1, seed=9).frames[0]
    target = scale_init(other, c, s)
    state = scale_init(frame, c, s)
    gaps = []
    for _ in range(6):
        state = scale_update(other, c, s, state, 0.3)
        gaps.append(np.abs(state.num - target.num).max())
    # fixed-point iteration: the gap shrinks by exactly (1 - eta) per step
    np.testing.assert_allclose(np.array(gaps[1:]) / np.array(gaps[:-1]), 0.7, rtol=1e-9)


def test_brightness_offset_invariance(scene):
    frame, c, s = scene
    f = frame.astype(np.float64) / 255.0 * 0.6 + 0.1
    state = scale_init(f, c, s)
    a = scale_detect(f, c, s, state).response
    b = scale_detect(f + 0.2, c, s, state).response
    np.testing.assert_allclose(b, a, rtol=1e-9, atol=1e-12 * np.abs(a).max())


def test_centre_hypothesis_is_the_target_patch(scene):
    frame, c, s = scene
    cfg = ScaleConfig()
    ms = model_size_for(s, cfg)
    stack = scale_samples(frame, c, s, cfg, ms)
    direct = crop_patch(frame, c, s, 1.0, ms).astype(np.float32) * np.float32(1 / 255)
    np.testing.assert_array_equal(stack[cfg.num_scales // 2], direct)


def test_model_size():
    cfg = ScaleConfig()
    assert model_size_for((40, 40), cfg) == (22, 22)
    assert model_size_for((10, 10), cfg) == (10, 10)
    assert model_size_for((3, 100), cfg)[0] == 8
    w, h = model_size_for((400, 100), cfg)
    assert w * h <= 512 and min(w, h) >= 8


def test_feature_matrix_shape(scene):
    frame, c, s = scene
    cfg = ScaleConfig()
    stack = scale_samples(frame, c, s, cfg, (24, 24))
    assert scale_features(stack, cfg).shape == (6 * 6 * 31, 33)


def test_multiplier_is_clamped(scene):
    frame, c, s = scene
    state = scale_init(frame, c, s)
    assert apply_multiplier(state, 1e6).current_scale == state.max_scale
    assert apply_multiplier(state, 1e-6).current_scale == state.min_scale


def test_zoom_recovery():
    seq = zooming_square()
    box = seq.boxes[0]
    c = (box[0] + box[2] / 2, box[1] + box[3] / 2)
    state = scale_init(seq.frames[0], c, box[2:])
    for f in seq.frames[1:]:
        est = scale_detect(f, c, state.size, state)
        state = apply_multiplier(state, est.multiplier)
        state = scale_update(f, c, state.size, state, 0.016)
    truth = seq.boxes[-1][2] / seq.boxes[0][2]
    assert abs(state.current_scale / truth - 1) <= 0.05
