"""Fading realizations for the access, RF fronthaul and FSO links, plus the
per-block fronthaul capacities."""
from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .sysmodel import Link, SystemConfig, db_to_linear, noise_powers, stream


@dataclass(frozen=True)
class ChannelRealization:
    """One fading block.

    H is MN x K with RU m occupying rows m*N .. m*N+N-1; F has shape
    (M, L, N); g holds the M FSO gains.
    """

    H: np.ndarray
    F: np.ndarray
    g: np.ndarray

    def to_dict(self) -> dict:
        return {
            "H_re": self.H.real.tolist(), "H_im": self.H.imag.tolist(),
            "F_re": self.F.real.tolist(), "F_im": self.F.imag.tolist(),
            "g": self.g.tolist(),
        }


@dataclass(frozen=True)
class CapacityVector:
    C_fso: np.ndarray
    C_rf: np.ndarray


def path_gain(cfg: SystemConfig, d: float, g_tx_dbi: float, g_rx_dbi: float) -> float:
    """Average power gain of an RF link with reference-distance path loss."""
    gains = db_to_linear(g_tx_dbi) * db_to_linear(g_rx_dbi)
    ref = (cfg.lambda_rf_m * math.sqrt(gains) / (4.0 * math.pi * cfg.d_ref_m)) ** 2
    return ref * (cfg.d_ref_m / d) ** cfg.nu


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    # unit-variance circularly symmetric complex Gaussian
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def _per_ru(rng, M: int) -> list[np.random.Generator]:
    if isinstance(rng, np.random.Generator):
        return [rng] * M
    rngs = list(rng)
    if len(rngs) != M:
        raise ValueError(f"expected {M} generators, got {len(rngs)}")
    return rngs


def draw_access(cfg: SystemConfig, rng: np.random.Generator | Sequence[np.random.Generator]
                ) -> np.ndarray:
    """Rayleigh access channel H (MN x K).

    ``rng`` is one generator shared by all RUs or one generator per RU.
    """
    beta = path_gain(cfg, cfg.d_ac_m, cfg.G_mu_tx_dbi, cfg.G_ru_rx_dbi)
    blocks = [math.sqrt(beta) * _cn(r, (cfg.N, cfg.K)) for r in _per_ru(rng, cfg.M)]
    return np.vstack(blocks)


def rician_fading(rng: np.random.Generator, shape, k_factor: float) -> np.ndarray:
    """Unit mean-square Rician coefficients; zero-phase direct path."""
    los = math.sqrt(k_factor / (k_factor + 1.0))
    nlos = math.sqrt(1.0 / (k_factor + 1.0))
    return los + nlos * _cn(rng, shape)


def draw_fronthaul_rf(cfg: SystemConfig, rng) -> np.ndarray:
    """Rician RF fronthaul matrices, shape (M, L, N)."""
    beta = path_gain(cfg, cfg.d_fr_m, cfg.G_ru_tx_dbi, cfg.G_cu_rx_dbi)
    kf = db_to_linear(cfg.Omega_db)
    return np.stack([math.sqrt(beta) * rician_fading(r, (cfg.L, cfg.N), kf)
                     for r in _per_ru(rng, cfg.M)])


def fso_mean_gain(cfg: SystemConfig) -> float:
    """Average FSO gain: responsivity x beam capture x weather attenuation."""
    beam = math.sqrt(2.0) * cfg.phi_divergence_rad * cfg.d_fr_m
    arg = math.sqrt(math.pi) * cfg.r_aperture_m / beam
    capture = math.erf(arg) ** 2
    atten_db = cfg.kappa_db_per_km * cfg.d_fr_m / 1000.0
    return cfg.R_responsivity * capture * 10.0 ** (-atten_db / 10.0)


def gamma_gamma(rng: np.random.Generator, theta: float, phi: float, size=None):
    """Unit-mean Gamma-Gamma variates as a product of unit-mean Gammas."""
    return rng.gamma(theta, 1.0 / theta, size) * rng.gamma(phi, 1.0 / phi, size)


def draw_fso(cfg: SystemConfig, rng) -> np.ndarray:
    gbar = fso_mean_gain(cfg)
    return np.array([gbar * gamma_gamma(r, cfg.Theta, cfg.Phi) for r in _per_ru(rng, cfg.M)])


def fso_capacity(g, cfg: SystemConfig):
    """Achievable IM/DD rate in bits/s for FSO gain(s) ``g``."""
    g = np.asarray(g, dtype=float)
    snr = math.e * cfg.Pfso_m_w**2 * g**2 / (2.0 * math.pi * cfg.delta2_a2)
    return 0.5 * cfg.W_fso_hz * np.log2(1.0 + snr)


def water_level(gains: np.ndarray, power: float, noise: float) -> float:
    """Water level for mode power gains ``gains`` (the squared singular values).

    Exact active-set solution: with the inverse levels sorted ascending, the
    first k modes are active for the largest k whose level stays above the
    k-th inverse level.
    """
    gains = np.asarray(gains, dtype=float)
    inv = np.sort(noise / gains[gains > 0])
    if inv.size == 0:
        return 0.0
    mu = inv[0] + power
    for k in range(1, inv.size + 1):
        cand = (power + inv[:k].sum()) / k
        if cand > inv[k - 1]:
            mu = cand
        else:
            break
    return float(mu)


def rf_fronthaul_capacity(F_m: np.ndarray, cfg: SystemConfig) -> float:
    """Waterfilling capacity (bits/s) of one L x N fronthaul matrix."""
    _, varrho2 = noise_powers(cfg)
    chi2 = np.linalg.svd(F_m, compute_uv=False) ** 2
    chi2 = chi2[chi2 > 0]
    if chi2.size == 0:
        return 0.0
    mu = water_level(chi2, cfg.Pbar_m_w, varrho2)
    return float(cfg.W_rf_hz * np.sum(np.maximum(np.log2(mu * chi2 / varrho2), 0.0)))


def draw_realization(cfg: SystemConfig, seed: int, block: int) -> ChannelRealization:
    """All three link types for one block, each RU on its own stream."""
    M = cfg.M
    H = draw_access(cfg, [stream(seed, block, Link.ACCESS, m) for m in range(M)])
    F = draw_fronthaul_rf(cfg, [stream(seed, block, Link.RF_FRONTHAUL, m) for m in range(M)])
    g = draw_fso(cfg, [stream(seed, block, Link.FSO, m) for m in range(M)])
    return ChannelRealization(H=H, F=F, g=g)


def capacities(cfg: SystemConfig, real: ChannelRealization) -> CapacityVector:
    c_fso = np.asarray(fso_capacity(real.g, cfg), dtype=float)
    c_rf = np.array([rf_fronthaul_capacity(F_m, cfg) for F_m in real.F])
    return CapacityVector(C_fso=c_fso, C_rf=c_rf)
