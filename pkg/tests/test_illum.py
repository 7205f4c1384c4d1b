import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adtrack.errors import InvalidConfig, InvalidInput
from adtrack.illum import IlluminanceConfig, Mode, classify_light, decide_mode, log_average_luminance, world_illuminance

from oracles import log_average_loop, world_illuminance_loop


def test_default_config_values():
    cfg = IlluminanceConfig()
    assert (cfg.alpha_r, cfg.alpha_g, cfg.alpha_b) == (0.299, 0.587, 0.114)
    assert cfg.delta == 1e-4 and cfg.tau == 0.15


@pytest.mark.parametrize("kwargs", [
    dict(alpha_r=0.3, alpha_g=0.3, alpha_b=0.3),
    dict(alpha_r=-0.1, alpha_g=0.987, alpha_b=0.113),
    dict(delta=0.0),
    dict(tau=0.0),
    dict(tau=1.0),
])
def test_invalid_config(kwargs):
    with pytest.raises(InvalidConfig):
        IlluminanceConfig(**kwargs)


def test_uniform_image():
    assert np.all(world_illuminance(np.full((5, 6, 3), 0.5)) == pytest.approx(0.5, abs=1e-15))


def test_green_pixel():
    assert world_illuminance(np.array([[[0.0, 1.0, 0.0]]]))[0, 0] == 0.587


def test_matches_scalar_loop():
    img = np.random.default_rng(0).random((4, 4, 3))
    np.testing.assert_allclose(world_illuminance(img), world_illuminance_loop(img), rtol=0, atol=1e-12)


def test_empty_image_rejected():
    with pytest.raises(InvalidInput):
        world_illuminance(np.zeros((0, 4, 3)))
    with pytest.raises(InvalidInput):
        world_illuminance(np.zeros((4, 4)))


def test_stack_input():
    imgs = np.random.default_rng(1).random((3, 4, 5, 3))
    out = world_illuminance(imgs)
    for k in range(3):
        np.testing.assert_array_equal(out[k], world_illuminance(imgs[k]))


def test_log_average_examples():
    assert log_average_luminance(np.full((3, 3), 0.25)) == pytest.approx(0.25 + 1e-4, rel=1e-14)
    assert log_average_luminance(np.zeros((3, 3))) == pytest.approx(1e-4, rel=1e-14)
    two = np.array([[0.1, 0.4]])
    # geometric mean of 0.1001 and 0.4001, frozen from the scalar oracle
    assert log_average_luminance(two) == pytest.approx(0.200124985946283, rel=1e-12)
    assert log_average_luminance(two) == pytest.approx(log_average_loop(two), rel=1e-14)
    assert math.sqrt(0.1001 * 0.4001) == pytest.approx(0.200124985946283, rel=1e-12)


def test_log_average_empty():
    with pytest.raises(InvalidInput):
        log_average_luminance(np.zeros((0,)))


@pytest.mark.parametrize("l_tilde,mode", [(0.05, Mode.NIGHT), (0.5, Mode.DAY), (0.15, Mode.DAY)])
def test_classify_examples(l_tilde, mode):
    assert classify_light(l_tilde, 0.15) is mode


def test_classify_changes_once():
    modes = [classify_light(x, 0.15) for x in np.linspace(0, 1, 1001)]
    flips = sum(a is not b for a, b in zip(modes, modes[1:]))
    assert flips == 1 and modes[0] is Mode.NIGHT and modes[-1] is Mode.DAY


def test_decide_mode():
    assert decide_mode(np.full((8, 8, 3), 0.5))[0] is Mode.DAY
    assert decide_mode(np.full((8, 8, 3), 0.05))[0] is Mode.NIGHT


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), a=st.floats(0, 0.5), b=st.floats(0, 0.5))
def test_linearity(seed, a, b):
    rng = np.random.default_rng(seed)
    i1, i2 = rng.random((4, 5, 3)), rng.random((4, 5, 3))
    np.testing.assert_allclose(world_illuminance(a * i1 + b * i2),
                               a * world_illuminance(i1) + b * world_illuminance(i2), atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_log_average_permutation_and_monotone(seed):
    rng = np.random.default_rng(seed)
    lum = rng.random((6, 7))
    base = log_average_luminance(lum)
    assert log_average_luminance(rng.permutation(lum.ravel()).reshape(6, 7)) == pytest.approx(base, rel=1e-12)
    raised = lum.copy()
    idx = tuple(rng.integers(0, s) for s in lum.shape)
    raised[idx] = min(1.0, raised[idx] + rng.random())
    assert log_average_luminance(raised) >= base


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_luminance_range(seed):
    img = np.random.default_rng(seed).random((5, 5, 3))
    lum = world_illuminance(img)
    assert lum.min() >= 0 and lum.max() <= 1
