import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cranfso.channel import (capacities, draw_access, draw_fronthaul_rf, draw_fso,
                             draw_realization, fso_capacity, fso_mean_gain, gamma_gamma,
                             path_gain, rf_fronthaul_capacity, rician_fading, water_level)
from cranfso.sysmodel import SystemConfig, noise_powers


def _unit_noise_cfg(power_w: float) -> SystemConfig:
    # 1 MHz, no noise figure and 30 dBm/MHz give a noise power of exactly 1 W
    return SystemConfig(W_rf_hz=1e6, f_s_hz=1e6, NF_db=0.0, N0_dbm_per_mhz=30.0,
                        Pbar_m_dbm=30.0 + 10 * math.log10(power_w))


def _bisect_capacity(chi2, power, noise, W):
    """Capacity from a water level found by plain bisection."""
    lo, hi = 0.0, power + noise / chi2.min() + 1.0
    for _ in range(200):
        mu = 0.5 * (lo + hi)
        if np.maximum(mu - noise / chi2, 0.0).sum() > power:
            hi = mu
        else:
            lo = mu
    mu = 0.5 * (lo + hi)
    return W * np.sum(np.maximum(np.log2(mu * chi2 / noise), 0.0)), mu


def test_path_gain_at_reference_distance():
    cfg = SystemConfig()
    expected = (cfg.lambda_rf_m / (4 * math.pi * cfg.d_ref_m)) ** 2
    assert path_gain(cfg, cfg.d_ref_m, 0.0, 0.0) == pytest.approx(expected, rel=1e-14)


def test_path_gain_slope():
    cfg = SystemConfig()
    ratio = path_gain(cfg, 100.0, 0.0, 0.0) / path_gain(cfg, 10.0, 0.0, 0.0)
    assert ratio == pytest.approx(10 ** -cfg.nu, rel=1e-12)


def test_access_power_matches_path_gain():
    cfg = SystemConfig(M=1, N=1, K=1)
    h = draw_access(cfg.replace(K=100_000), np.random.default_rng(1)).ravel()
    beta = path_gain(cfg, cfg.d_ac_m, cfg.G_mu_tx_dbi, cfg.G_ru_rx_dbi)
    assert np.mean(np.abs(h) ** 2) == pytest.approx(beta, rel=0.02)


def test_same_seed_same_channel():
    cfg = SystemConfig()
    a = draw_realization(cfg, 11, 4)
    b = draw_realization(cfg, 11, 4)
    np.testing.assert_array_equal(a.H, b.H)
    np.testing.assert_array_equal(a.F, b.F)
    np.testing.assert_array_equal(a.g, b.g)
    c = draw_realization(cfg, 11, 5)
    assert not np.array_equal(a.H, c.H)


def test_shapes():
    cfg = SystemConfig(K=3, M=2, N=4, L=3)
    real = draw_realization(cfg, 0, 0)
    assert real.H.shape == (8, 3)
    assert real.F.shape == (2, 3, 4)
    assert real.g.shape == (2,)


def test_rician_unit_power_and_direct_share():
    rng = np.random.default_rng(2)
    k = 10 ** 0.6
    f = rician_fading(rng, 100_000, k)
    assert np.mean(np.abs(f) ** 2) == pytest.approx(1.0, rel=0.02)
    assert abs(np.mean(f)) ** 2 == pytest.approx(k / (k + 1), rel=0.02)
    assert k / (k + 1) == pytest.approx(0.79924, abs=1e-5)


def test_rician_degenerates_to_rayleigh():
    rng = np.random.default_rng(3)
    f = rician_fading(rng, 100_000, 10 ** (-300 / 10))
    assert abs(np.mean(f)) < 0.01
    assert np.mean(np.abs(f) ** 2) == pytest.approx(1.0, rel=0.02)


def test_fronthaul_power_matches_path_gain():
    cfg = SystemConfig(M=1, L=1, N=1)
    F = draw_fronthaul_rf(cfg.replace(L=100_000), np.random.default_rng(4)).ravel()
    beta = path_gain(cfg, cfg.d_fr_m, cfg.G_ru_tx_dbi, cfg.G_cu_rx_dbi)
    assert np.mean(np.abs(F) ** 2) == pytest.approx(beta, rel=0.02)


def test_fso_mean_gain_limits():
    cfg = SystemConfig()
    assert fso_mean_gain(cfg.replace(kappa_db_per_km=1e6)) == 0.0
    wide = cfg.replace(r_aperture_m=1e3)
    expected = cfg.R_responsivity * 10 ** (-cfg.kappa_db_per_km * cfg.d_fr_m / 1000 / 10)
    assert fso_mean_gain(wide) == pytest.approx(expected, rel=1e-12)
    assert fso_mean_gain(cfg) == pytest.approx(9.89604347260966e-07, rel=1e-12)


def test_fso_gain_zero_under_total_attenuation():
    cfg = SystemConfig(kappa_db_per_km=1e6)
    assert np.all(draw_fso(cfg, np.random.default_rng(0)) == 0.0)


def test_gamma_gamma_unit_mean():
    g = gamma_gamma(np.random.default_rng(5), 2.23, 1.54, 100_000)
    assert np.mean(g) == pytest.approx(1.0, rel=0.02)
    # scintillation index 1/a + 1/b + 1/(ab)
    assert np.var(g) == pytest.approx(1 / 2.23 + 1 / 1.54 + 1 / (2.23 * 1.54), rel=0.05)


def test_fso_capacity_examples():
    cfg = SystemConfig()
    assert fso_capacity(0.0, cfg) == 0.0
    g3 = math.sqrt(3 * 2 * math.pi * cfg.delta2_a2 / (math.e * cfg.Pfso_m_w ** 2))
    assert fso_capacity(g3, cfg) == pytest.approx(cfg.W_fso_hz, rel=1e-12)
    # hand evaluation with P = 10^-1.7 W, delta^2 = 1e-14, W = 1 GHz
    assert fso_capacity(1.0, cfg) == pytest.approx(17001818358.653225, rel=1e-12)


@pytest.mark.parametrize("chi2, power, mu, cap", [
    ([1.0], 1.0, 2.0, 1.0),
    ([1.0, 1.0], 2.0, 2.0, 2.0),
    ([1.0, 0.1], 0.5, 1.5, math.log2(1.5)),
])
def test_water_level_examples(chi2, power, mu, cap):
    chi2 = np.array(chi2)
    assert water_level(chi2, power, 1.0) == pytest.approx(mu, rel=1e-14)
    cfg = _unit_noise_cfg(power)
    assert noise_powers(cfg)[1] == pytest.approx(1.0, rel=1e-12)
    F = np.diag(np.sqrt(chi2))
    assert rf_fronthaul_capacity(F, cfg) == pytest.approx(cap * cfg.W_rf_hz, rel=1e-12)


def test_zero_fronthaul_matrix_has_no_capacity():
    assert rf_fronthaul_capacity(np.zeros((2, 2)), SystemConfig()) == 0.0


def test_waterfilling_against_bisection():
    cfg = SystemConfig()
    _, noise = noise_powers(cfg)
    rng = np.random.default_rng(6)
    for _ in range(100):
        L, N = rng.integers(1, 5, size=2)
        F = draw_fronthaul_rf(cfg.replace(M=1, L=int(L), N=int(N)), rng)[0]
        F *= 10 ** rng.uniform(-1.5, 0.5)
        chi2 = np.linalg.svd(F, compute_uv=False) ** 2
        ref, _ = _bisect_capacity(chi2, cfg.Pbar_m_w, noise, cfg.W_rf_hz)
        got = rf_fronthaul_capacity(F, cfg)
        assert got == pytest.approx(ref, rel=1e-3)
        mu = water_level(chi2, cfg.Pbar_m_w, noise)
        used = np.maximum(mu - noise / chi2, 0.0).sum()
        assert abs(used - cfg.Pbar_m_w) <= 1e-10 * cfg.Pbar_m_w


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(1e-4, 1e4), min_size=1, max_size=6), st.floats(1e-3, 1e3))
def test_water_level_spends_the_power(gains, power):
    gains = np.array(gains)
    mu = water_level(gains, power, 1.0)
    used = np.maximum(mu - 1.0 / gains, 0.0).sum()
    assert used == pytest.approx(power, rel=1e-10)


def test_capacities_vector():
    cfg = SystemConfig()
    caps = capacities(cfg, draw_realization(cfg, 0, 0))
    assert caps.C_fso.shape == caps.C_rf.shape == (cfg.M,)
    assert np.all(caps.C_fso >= 0) and np.all(caps.C_rf > 0)
