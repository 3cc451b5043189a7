"""System configuration, unit conversions, noise powers and seeded streams.

All physical quantities use SI units unless the field name says otherwise
(``_dbm``, ``_db``, ``_dbi``, ``_per_mhz``, ``_per_km``).
"""
from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import yaml

DSC_MAX_RUS = 8


class ConfigError(ValueError):
    """Raised for malformed or invalid configuration input."""


class Link(enum.IntEnum):
    """Link-type component of a random stream id."""

    ACCESS = 0
    RF_FRONTHAUL = 1
    FSO = 2


@dataclass(frozen=True)
class SystemConfig:
    # network size
    K: int = 2
    M: int = 2
    N: int = 2
    L: int = 2
    # powers
    P_k_dbm: float = 16.0
    Pbar_m_dbm: float = 33.0
    Pfso_m_dbm: float = 13.0
    # bandwidths / sampling
    W_rf_hz: float = 40e6
    W_fso_hz: float = 1e9
    f_s_hz: float = 40e6
    # noise
    N0_dbm_per_mhz: float = -114.0
    NF_db: float = 5.0
    delta2_a2: float = 1e-14
    # geometry and propagation
    d_ac_m: float = 100.0
    d_fr_m: float = 500.0
    d_ref_m: float = 5.0
    nu: float = 3.5
    lambda_rf_m: float = 85.7e-3
    lambda_fso_m: float = 1550e-9
    G_mu_tx_dbi: float = 0.0
    G_ru_rx_dbi: float = 10.0
    G_ru_tx_dbi: float = 10.0
    G_cu_rx_dbi: float = 10.0
    Omega_db: float = 6.0
    Theta: float = 2.23
    Phi: float = 1.54
    # 80 dB/km is heavy fog (0.08 dB per metre of fronthaul distance)
    kappa_db_per_km: float = 80.0
    R_responsivity: float = 0.5
    r_aperture_m: float = 0.1
    phi_divergence_rad: float = 2e-3
    # solver options
    gss_epsilon: float = 0.01
    aco_epsilon_bps: float = 1e4
    n_max: int = 50
    d0_scale: float = 1.0
    barrier_t0: float = 1.0
    barrier_mu: float = 10.0
    newton_tol: float = 1e-8
    subproblem_tol: float = 1e-6
    rng_seed: int = 0

    def replace(self, **changes: Any) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @property
    def P_k_w(self) -> float:
        return dbm_to_watt(self.P_k_dbm)

    @property
    def Pbar_m_w(self) -> float:
        return dbm_to_watt(self.Pbar_m_dbm)

    @property
    def Pfso_m_w(self) -> float:
        return dbm_to_watt(self.Pfso_m_dbm)


_INT_FIELDS = {f.name for f in dataclasses.fields(SystemConfig) if f.type in ("int", int)}


def dbm_to_watt(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watt_to_dbm(p_w: float) -> float:
    return 10.0 * math.log10(p_w) + 30.0


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def noise_powers(cfg: SystemConfig) -> tuple[float, float]:
    """Noise power at the RU antennas and at the CU antennas, in watts.

    The PSD is given per MHz, so the bandwidth enters in MHz and the noise
    figure is added in the dB domain. Both receivers share the same value.
    """
    level_dbm = cfg.N0_dbm_per_mhz + 10.0 * math.log10(cfg.W_rf_hz / 1e6) + cfg.NF_db
    sigma2 = dbm_to_watt(level_dbm)
    return sigma2, sigma2


def validate(cfg: SystemConfig, quantizer: str | None = None) -> list[str]:
    """Return the names of all violated invariants (empty list means valid).

    ``quantizer`` enables the scheme-specific DSC subset bound.
    """
    bad: list[str] = []
    for name in ("K", "M", "N", "L"):
        if getattr(cfg, name) < 1:
            bad.append(f"{name} ≥ 1")
    for name in ("P_k_dbm", "Pbar_m_dbm", "Pfso_m_dbm", "N0_dbm_per_mhz", "NF_db",
                 "Omega_db", "kappa_db_per_km"):
        if not math.isfinite(getattr(cfg, name)):
            bad.append(f"{name} finite")
    for name in ("W_rf_hz", "W_fso_hz", "f_s_hz", "delta2_a2", "d_ac_m", "d_fr_m",
                 "d_ref_m", "nu", "lambda_rf_m", "lambda_fso_m", "Theta", "Phi",
                 "R_responsivity", "r_aperture_m", "phi_divergence_rad"):
        v = getattr(cfg, name)
        if not (math.isfinite(v) and v > 0):
            bad.append(f"{name} > 0")
    if cfg.kappa_db_per_km < 0:
        bad.append("kappa_db_per_km ≥ 0")
    if cfg.f_s_hz < cfg.W_rf_hz:
        bad.append("f_s_hz ≥ W_rf_hz")
    if not cfg.gss_epsilon > 0:
        bad.append("gss_epsilon > 0")
    if not cfg.aco_epsilon_bps > 0:
        bad.append("aco_epsilon_bps > 0")
    if cfg.n_max < 1:
        bad.append("n_max ≥ 1")
    for name in ("d0_scale", "barrier_t0", "newton_tol", "subproblem_tol"):
        if not getattr(cfg, name) > 0:
            bad.append(f"{name} > 0")
    if not cfg.barrier_mu > 1:
        bad.append("barrier_mu > 1")
    if not 0 <= cfg.rng_seed < 2**64:
        bad.append("rng_seed is a u64")
    if quantizer is not None and str(quantizer).lower() == "dsc" and cfg.M > DSC_MAX_RUS:
        bad.append("DSC subset bound")
    return bad


def load_config(path: str | Path, **overrides: Any) -> SystemConfig:
    """Read a YAML mapping of ``field: value`` pairs into a SystemConfig.

    Unknown keys and invariant violations raise ConfigError.
    """
    text = Path(path).read_text()
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return config_from_dict({**data, **overrides})


def config_from_dict(data: dict[str, Any]) -> SystemConfig:
    known = {f.name for f in dataclasses.fields(SystemConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    kwargs = {}
    for key, value in data.items():
        try:
            kwargs[key] = int(value) if key in _INT_FIELDS else float(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: cannot parse {value!r}") from exc
    cfg = SystemConfig(**kwargs)
    bad = validate(cfg)
    if bad:
        raise ConfigError("invalid config: " + "; ".join(bad))
    return cfg


def stream(seed: int, block: int, link: Link | int, ru: int) -> np.random.Generator:
    """Independent Philox stream for one (block, link type, RU) triple.

    The counter-based generator makes every stream addressable directly, so
    blocks can be drawn in any order or in parallel with identical results.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(block), int(link), int(ru)))
    return np.random.Generator(np.random.Philox(ss))
