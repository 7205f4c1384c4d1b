import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adtrack.dcf import (
    DAY_CONFIG,
    NIGHT_CONFIG,
    AdmmSchedule,
    AdmmState,
    AppearanceModel,
    DualFilter,
    Support,
    TrainConfig,
    augmented_lagrangian,
    correlate,
    crop_irfft2,
    detect,
    dual_objective,
    gaussian_label,
    irfft2,
    lift,
    lift_rfft2,
    locate_peak,
    rfft2,
    solve_v_subproblem,
    solve_w_subproblem,
    train_dual_filters,
    update_lagrangian,
    update_model,
)
from adtrack.errors import InvalidConfig, InvalidInput
from adtrack.illum import Mode

from dcf_instances import GRID, ORACLE_SCHEDULE, SUPPORT, instance, label8, random_complex as _complex
from oracles import dense_dual_solve, dense_objective, label_loop

# -- configuration ------------------------------------------------------------------


def test_mode_parameters():
    assert (DAY_CONFIG.mu, DAY_CONFIG.psi, DAY_CONFIG.eta_t, DAY_CONFIG.eta_s) == (280.0, 0.02, 0.032, 0.016)
    assert (NIGHT_CONFIG.mu, NIGHT_CONFIG.psi, NIGHT_CONFIG.eta_t, NIGHT_CONFIG.eta_s) == (200.0, 0.01, 0.024, 0.023)
    assert TrainConfig.for_mode(Mode.NIGHT) is NIGHT_CONFIG and TrainConfig.for_mode("day") is DAY_CONFIG


@pytest.mark.parametrize("kwargs", [dict(mu=-1.0), dict(eta_t=0.0), dict(eta_s=1.0), dict(lam=float("nan"))])
def test_invalid_train_config(kwargs):
    with pytest.raises(InvalidConfig):
        TrainConfig(**kwargs)


def test_invalid_schedule():
    with pytest.raises(InvalidConfig):
        AdmmSchedule(coupling="other")
    with pytest.raises(InvalidConfig):
        AdmmSchedule(gamma0=0.0)


# -- label ----------------------------------------------------------------------------


def test_label_peak_and_symmetry():
    y = gaussian_label((9, 12), 1 / 16, (5, 6))
    assert y.values[0, 0] == 1.0
    np.testing.assert_array_equal(y.values, np.roll(y.values[::-1, ::-1], (1, 1), axis=(0, 1)))
    assert y.sigma == pytest.approx(np.sqrt(30) / 16)


def test_label_oracle_8x8():
    y = label8()
    np.testing.assert_allclose(y.values, label_loop(8, 8, 1.0), rtol=0, atol=1e-12)
    assert y.values[1, 2] == pytest.approx(0.0820849986238988, abs=1e-15)
    assert y.values[4, 4] == pytest.approx(1.1253517471925912e-07, abs=1e-20)
    np.testing.assert_allclose(y.dft, np.fft.rfft2(y.values), atol=1e-12)


def test_label_errors():
    with pytest.raises(InvalidInput):
        gaussian_label((0, 4), 0.1, (2, 2))
    with pytest.raises(InvalidInput):
        gaussian_label((4, 4), 0.0, (2, 2))


# -- FFT helpers -----------------------------------------------------------------------


def test_pruned_transforms_match_full():
    rng = np.random.default_rng(0)
    grid, sup = (12, 10), Support.centered((12, 10), (5, 4))
    w = rng.standard_normal((5, 4, 3))
    np.testing.assert_allclose(lift_rfft2(w, sup, grid), rfft2(lift(w, sup, grid)), atol=1e-12)
    half = rfft2(rng.standard_normal(grid + (3,)))
    np.testing.assert_allclose(crop_irfft2(half, sup, grid), sup.crop(irfft2(half, grid)), atol=1e-12)


def test_support_centered():
    assert Support.centered((50, 50), (10, 10)) == Support(20, 20, 10, 10)
    assert Support.centered((9, 8), (3, 3)) == Support(3, 3, 3, 3)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_parseval(seed):
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((4, 4, 3))
    full = lift(w, SUPPORT, GRID)
    F = np.fft.fft2(full, axes=(0, 1))
    T = GRID[0] * GRID[1]
    assert np.sum(w**2) == pytest.approx(np.sum(np.abs(F) ** 2) / T, rel=1e-9)


# -- ADMM sub-problems ------------------------------------------------------------------


def test_w_step_scalar_cases():
    rng = np.random.default_rng(1)
    v, w_o, th = rng.standard_normal((3, 4, 4, 2))
    T, gamma = 64, 2.0
    cfg0 = TrainConfig(mu=0.0)
    np.testing.assert_allclose(solve_w_subproblem(w_o, 0 * v, v, cfg0, gamma, T),
                               gamma * T * v / (cfg0.lam + gamma * T), rtol=1e-14)
    cfg = TrainConfig(mu=5.0)
    np.testing.assert_allclose(solve_w_subproblem(w_o, 0 * v, 0 * v, cfg, gamma, T),
                               5.0 * w_o / (cfg.lam + 5.0 + gamma * T), rtol=1e-14)
    out = solve_w_subproblem(w_o, th, v, cfg, gamma, T)
    for idx in np.ndindex(v.shape):
        expect = (5.0 * w_o[idx] + T * th[idx] + gamma * T * v[idx]) / (cfg.lam + 5.0 + gamma * T)
        assert out[idx] == pytest.approx(expect, abs=1e-12)


def test_w_step_zero_denominator():
    with pytest.raises(InvalidConfig):
        solve_w_subproblem(np.zeros(2), np.zeros(2), np.zeros(2), TrainConfig(lam=0.0, mu=0.0), 0.0, 4)


def test_v_step_rank_one_case():
    rng = np.random.default_rng(2)
    x, w, th = (_complex(rng, (4, 4, 1)) for _ in range(3))
    y = _complex(rng, (4, 4))
    gamma, T = 0.7, 16
    out = solve_v_subproblem(x, y, w, th, gamma, T)
    direct = (x[..., 0] * y - T * th[..., 0] + gamma * T * w[..., 0]) / (np.abs(x[..., 0]) ** 2 + T * gamma)
    np.testing.assert_allclose(out[..., 0], direct, rtol=0, atol=1e-12)


def test_v_step_zero_data():
    rng = np.random.default_rng(3)
    w, th = _complex(rng, (4, 4, 3)), _complex(rng, (4, 4, 3))
    out = solve_v_subproblem(np.zeros((4, 4, 3), complex), np.zeros((4, 4), complex), w, th, 2.0, 16)
    np.testing.assert_allclose(out, (-16 * th + 2.0 * 16 * w) / (2.0 * 16), atol=1e-12)


def test_lagrangian_update():
    rng = np.random.default_rng(5)
    th, v, w = (_complex(rng, (3, 3, 2)) for _ in range(3))
    np.testing.assert_array_equal(update_lagrangian(th, w, w, 3.0), th)
    np.testing.assert_array_equal(update_lagrangian(th, v, w, 0.0), th)
    out = update_lagrangian(th, v, w, 0.3)
    for idx in np.ndindex(th.shape):
        assert out[idx] == pytest.approx(th[idx] + 0.3 * (v[idx] - w[idx]), abs=1e-12)


def test_admm_state_schedule():
    st_ = AdmmState.start((2, 2, 1), complex, AdmmSchedule())
    gammas = []
    for _ in range(6):
        gammas.append(st_.gamma)
        st_.advance()
    assert gammas == [1.0, 10.0, 100.0, 1000.0, 1e4, 1e4]


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), gamma=st.floats(0.1, 100.0))
def test_w_and_v_steps_do_not_increase_augmented_lagrangian(seed, gamma):
    rng = np.random.default_rng(seed)
    x_g, _ = instance(seed)
    x_hat = rfft2(x_g)
    y = label8()
    cfg = TrainConfig(mu=3.0)
    T = 64
    w_other = rng.standard_normal((4, 4, 2))
    state = AdmmState(rfft2(rng.standard_normal((8, 8, 2))), rfft2(rng.standard_normal((8, 8, 2))) * 0.1,
                      gamma, 1e4, 1.0)
    w = rng.standard_normal((4, 4, 2))
    for _ in range(3):
        before = augmented_lagrangian(w, w_other, state, x_hat, y, SUPPORT, cfg)
        theta_s = SUPPORT.crop(irfft2(state.theta_hat, GRID))
        v_s = SUPPORT.crop(irfft2(state.v_hat, GRID))
        w = solve_w_subproblem(w_other, theta_s, v_s, cfg, state.gamma, T)
        mid = augmented_lagrangian(w, w_other, state, x_hat, y, SUPPORT, cfg)
        state.v_hat = solve_v_subproblem(x_hat, y.dft, rfft2(lift(w, SUPPORT, GRID)), state.theta_hat,
                                         state.gamma, T)
        after = augmented_lagrangian(w, w_other, state, x_hat, y, SUPPORT, cfg)
        scale = max(1.0, abs(before))
        assert mid <= before + 1e-8 * scale
        assert after <= mid + 1e-8 * scale
        state.theta_hat = update_lagrangian(state.theta_hat, state.v_hat, rfft2(lift(w, SUPPORT, GRID)), state.gamma)


# -- training ------------------------------------------------------------------------------


def test_dense_oracle_frozen_value():
    x_g, x_o = instance(0)
    y = label_loop(8, 8, 1.0)
    w_g, w_o = dense_dual_solve(x_g, x_o, y, tuple(SUPPORT), 0.01, 280.0)
    assert dense_objective(w_g, w_o, x_g, x_o, y, tuple(SUPPORT), 0.01, 280.0) == pytest.approx(
        1.839647396927992, rel=1e-10)
    assert dual_objective(w_g, w_o, rfft2(x_g), rfft2(x_o), label8(), SUPPORT, TrainConfig(mu=280.0)) == \
        pytest.approx(1.839647396927992, rel=1e-10)


def test_identical_streams_give_identical_filters():
    x_g, _ = instance(7)
    f = train_dual_filters(x_g, x_g, label8(), DAY_CONFIG, SUPPORT, ORACLE_SCHEDULE)
    np.testing.assert_allclose(f.w_g, f.w_o, atol=1e-6 * np.abs(f.w_g).max())


def test_alternating_coupling_converges_at_moderate_mu():
    x_g, x_o = instance(9)
    y = label8()
    cfg = TrainConfig(mu=5.0)
    joint = train_dual_filters(x_g, x_o, y, cfg, SUPPORT, ORACLE_SCHEDULE)
    alt = train_dual_filters(x_g, x_o, y, cfg, SUPPORT,
                             AdmmSchedule(iterations=50, passes=20, growth=1.0, coupling="alternate"))
    e_joint = dual_objective(joint.w_g, joint.w_o, rfft2(x_g), rfft2(x_o), y, SUPPORT, cfg)
    e_alt = dual_objective(alt.w_g, alt.w_o, rfft2(x_g), rfft2(x_o), y, SUPPORT, cfg)
    assert e_alt == pytest.approx(e_joint, rel=1e-3)


def test_fourier_input_matches_spatial():
    x_g, x_o = instance(10)
    y = label8()
    a = train_dual_filters(x_g, x_o, y, DAY_CONFIG, SUPPORT)
    b = train_dual_filters(rfft2(x_g), rfft2(x_o), y, DAY_CONFIG, SUPPORT, fourier=True)
    np.testing.assert_allclose(a.w_g, b.w_g, atol=1e-12)


def test_filters_live_on_support():
    x_g, x_o = instance(11)
    f = train_dual_filters(x_g, x_o, label8(), DAY_CONFIG, SUPPORT)
    full = irfft2(f.w_g_hat, GRID)
    outside = np.ones(GRID, bool)
    outside[SUPPORT.slices] = False
    assert np.abs(full[outside]).max() < 1e-12
    assert f.w_g.shape == f.w_o.shape == (4, 4, 2) and np.isfinite(f.w_g).all()


def test_training_errors():
    x_g, x_o = instance(12)
    y = label8()
    with pytest.raises(InvalidInput):
        train_dual_filters(x_g, x_o[:4], y, DAY_CONFIG, SUPPORT)
    bad = x_g.copy()
    bad[0, 0, 0] = np.nan
    with pytest.raises(InvalidInput):
        train_dual_filters(bad, x_o, y, DAY_CONFIG, SUPPORT)
    with pytest.raises(InvalidInput):
        train_dual_filters(x_g, x_o, y, DAY_CONFIG, Support(6, 6, 4, 4))


def test_monitoring_records_history():
    x_g, x_o = instance(13)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        f = train_dual_filters(x_g, x_o, label8(), DAY_CONFIG, SUPPORT, AdmmSchedule(passes=5))
    assert len(f.history) == 5 and f.objective == min(f.history)


def test_update_model():
    m = AppearanceModel(np.zeros(3), np.ones(3))
    assert update_model(m, np.full(3, 2.0), np.full(3, 2.0), 0.5).x_g.tolist() == [1.0, 1.0, 1.0]
    x = np.random.default_rng(0).random(3)
    np.testing.assert_array_equal(update_model(m, x, x, 1.0).x_g, x)
    np.testing.assert_array_equal(update_model(m, x, x, 0.0).x_o, m.x_o)
    with pytest.raises(InvalidInput):
        update_model(m, np.zeros(2), np.zeros(3), 0.5)


# -- detection --------------------------------------------------------------------------------


def _trained(seed=14):
    x_g, x_o = instance(seed, grid=(16, 16), d=3)
    f = train_dual_filters(x_g, x_o, gaussian_label((16, 16), 0.25, (6, 6)), DAY_CONFIG,
                           Support.centered((16, 16), (6, 6)), ORACLE_SCHEDULE)
    return f, x_g, x_o


def test_detect_psi_linearity_and_zero():
    f, z_g, z_o = _trained()
    r0 = detect(f, z_g, z_o, 0.0)
    np.testing.assert_allclose(r0.values, r0.context, atol=0)
    r1, r2 = detect(f, z_g, z_o, 0.3), detect(f, z_g, z_o, 0.8)
    np.testing.assert_allclose(r1.values + 0.5 * r1.target, r2.values, atol=1e-12)


def test_detect_output_is_real():
    f, z_g, z_o = _trained()
    W_g = np.fft.fft2(lift(f.w_g, f.support, f.grid), axes=(0, 1))
    W_o = np.fft.fft2(lift(f.w_o, f.support, f.grid), axes=(0, 1))
    Z_g, Z_o = np.fft.fft2(z_g, axes=(0, 1)), np.fft.fft2(z_o, axes=(0, 1))
    full = np.fft.ifft2(np.sum(W_g.conj() * Z_g + 0.02 * W_o.conj() * Z_o, axis=2))
    assert np.abs(full.imag).max() <= 1e-9
    np.testing.assert_allclose(detect(f, z_g, z_o, 0.02).values, full.real, atol=1e-12)


def test_detect_on_training_patch_peaks_at_zero():
    f, z_g, z_o = _trained(15)
    peak = locate_peak(detect(f, z_g, z_o, 0.02))
    assert abs(peak.dy) <= 1 and abs(peak.dx) <= 1


def test_detect_shape_errors():
    f, z_g, z_o = _trained()
    with pytest.raises(InvalidInput):
        detect(f, z_g[:8], z_o[:8], 0.02)
    with pytest.raises(InvalidInput):
        detect(f, z_g[..., :2], z_o[..., :2], 0.02)


def test_correlate_definition():
    rng = np.random.default_rng(16)
    w, x = rng.standard_normal((6, 5, 2)), rng.standard_normal((6, 5, 2))
    r = correlate(rfft2(w), rfft2(x), (6, 5))
    j = (2, 3)
    expect = sum(w[t] @ x[(t[0] + j[0]) % 6, (t[1] + j[1]) % 5] for t in np.ndindex(6, 5))
    assert r[j] == pytest.approx(expect, abs=1e-12)


def test_peak_delta():
    r = np.zeros((10, 12))
    r[2, 3] = 1.0
    p = locate_peak(r)
    assert (p.dy, p.dx, p.low_confidence) == (2.0, 3.0, False)
    r = np.zeros((10, 12))
    r[8, 11] = 1.0  # wraps to (-2, -1)
    assert locate_peak(r)[:2] == (-2.0, -1.0)


def test_peak_flat():
    p = locate_peak(np.full((6, 6), 0.3))
    assert (p.dy, p.dx, p.low_confidence) == (0.0, 0.0, True)


@pytest.mark.parametrize("true", [(2.5, -1.5), (0.3, 0.2), (-3.25, 4.4)])
def test_peak_subcell_gaussian(true):
    rows, cols = 16, 16
    dr = (np.arange(rows) + rows // 2) % rows - rows // 2
    dc = (np.arange(cols) + cols // 2) % cols - cols // 2
    r = np.exp(-((dr[:, None] - true[0]) ** 2 + (dc[None, :] - true[1]) ** 2) / (2 * 1.5**2))
    p = locate_peak(r)
    assert abs(p.dy - true[0]) <= 0.25 and abs(p.dx - true[1]) <= 0.25


def test_dual_filter_from_spatial():
    w = np.random.default_rng(17).standard_normal((4, 4, 2))
    f = DualFilter.from_spatial(w, w, SUPPORT, GRID)
    np.testing.assert_allclose(irfft2(f.w_o_hat, GRID), lift(w, SUPPORT, GRID), atol=1e-12)
