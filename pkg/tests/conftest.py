from __future__ import annotations

import numpy as np
import pytest

from cranfso.channel import capacities, draw_realization
from cranfso.rates import ALL_PAIRS, SchemePair, build_unified
from cranfso.sysmodel import SystemConfig


def make_problem(pair: SchemePair | str = "avq/mmse", block: int = 0, seed: int = 0,
                 cfg: SystemConfig | None = None, mu=None):
    cfg = cfg or SystemConfig()
    if isinstance(pair, str):
        pair = SchemePair.parse(*pair.split("/"))
    real = draw_realization(cfg, seed, block)
    caps = capacities(cfg, real)
    mu = np.full(cfg.K, 1.0 / cfg.K) if mu is None else mu
    return build_unified(cfg, real.H, caps, pair, mu)


def random_hermitian_pd(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (G @ G.conj().T / n + 0.05 * np.eye(n))


@pytest.fixture
def cfg():
    return SystemConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(params=[str(p) for p in ALL_PAIRS])
def pair_name(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
