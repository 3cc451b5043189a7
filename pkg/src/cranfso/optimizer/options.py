from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from ..sysmodel import SystemConfig


class Variant(str, enum.Enum):
    ACO = "aco"
    MACO = "maco"


@dataclass(frozen=True)
class SolverOptions:
    gss_epsilon: float = 0.01
    aco_epsilon_bps: float = 1e4
    n_max: int = 50
    d0_scale: float = 1.0          # D0 = d0_scale * sigma2 * I
    barrier_t0: float = 1.0
    barrier_mu: float = 10.0
    newton_tol: float = 1e-8
    subproblem_tol: float = 1e-6   # duality-gap proxy, bits/s/Hz
    max_newton: int = 200
    variant: Variant = Variant.MACO

    @classmethod
    def from_config(cls, cfg: SystemConfig, **changes) -> "SolverOptions":
        base = cls(
            gss_epsilon=cfg.gss_epsilon, aco_epsilon_bps=cfg.aco_epsilon_bps,
            n_max=cfg.n_max, d0_scale=cfg.d0_scale, barrier_t0=cfg.barrier_t0,
            barrier_mu=cfg.barrier_mu, newton_tol=cfg.newton_tol,
            subproblem_tol=cfg.subproblem_tol,
        )
        if "variant" in changes:
            changes["variant"] = Variant(changes["variant"])
        return replace(base, **changes)
