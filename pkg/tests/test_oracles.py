import numpy as np
import pytest

from cranfso.channel import CapacityVector, capacities, draw_realization
from cranfso.optimizer import SolverOptions, aco_inner, lemma1_transform, solve
from cranfso.optimizer.transforms import TransformedConstraints
from cranfso.oracles import (brute_force_small, distortion_grid, lemma_checkers,
                             scalar_oracle)
from cranfso.rates import SchemePair, build_unified, user_rate
from cranfso.sysmodel import SystemConfig

from conftest import make_problem

SCALAR = SystemConfig(K=1, M=1, N=1, L=1)


def scalar_setup(block):
    real = draw_realization(SCALAR, 0, block)
    caps = capacities(SCALAR, real)
    up = build_unified(SCALAR, real.H, caps, SchemePair.parse("avq", "mmse"), [1.0])
    return real, caps, up


@pytest.fixture(scope="module")
def scalar_case():
    real, caps, up = scalar_setup(0)
    return scalar_oracle(SCALAR, real, caps), up


def test_scalar_oracle_root_and_concavity(scalar_case):
    ref, _ = scalar_case
    assert ref.residual <= 1e-10
    assert ref.concave and ref.max_second_diff <= 1e-9
    assert ref.grid.size == 2001


def test_scalar_oracle_vanishing_access_time(scalar_case):
    ref, up = scalar_case
    assert ref.profile[0] == 0.0
    assert np.all(np.diff(ref.log_d[1:40]) > 0)
    assert ref.log_d[1] - np.log(up.sigma2) < -100
    assert ref.profile[1] < 1e-3 * ref.rate


def test_scalar_oracle_rate_matches_rate_function(scalar_case):
    ref, up = scalar_case
    assert user_rate(ref.alpha0, np.array([[ref.d]]), 0, up) == pytest.approx(ref.rate, rel=1e-9)


def test_scalar_distortion_matches_root(scalar_case):
    ref, up = scalar_case
    tc = lemma1_transform(up.C_fso, up.C_rf)
    opts = SolverOptions()
    res = aco_inner(ref.alpha0, up, tc, opts)
    assert res.D[0, 0].real == pytest.approx(ref.d, rel=5e-3)
    for i in range(100, 2001, 100):
        a = float(ref.grid[i])
        res = aco_inner(a, up, tc, opts)
        assert res.T == pytest.approx(ref.profile[i], rel=1e-4)
        # below this the rate no longer depends on d at solver precision
        if ref.log_d[i] - np.log(up.sigma2) > np.log(1e-3):
            assert res.D[0, 0].real == pytest.approx(np.exp(ref.log_d[i]), rel=5e-3)


def test_scalar_oracle_requires_scalar_system():
    cfg = SystemConfig()
    real = draw_realization(cfg, 0, 0)
    with pytest.raises(ValueError):
        scalar_oracle(cfg, real, capacities(cfg, real))


def test_distortion_grid():
    g = distortion_grid(2.0)
    assert g.size == 61
    assert g[0] == pytest.approx(2e-4) and g[-1] == pytest.approx(2e4) and g[30] == pytest.approx(2.0)


def test_brute_force_reproduces_scalar_oracle(scalar_case):
    ref, up = scalar_case
    bf = brute_force_small(up, grids=[distortion_grid(up.sigma2, 401)])
    assert bf.T <= ref.rate * (1 + 1e-9)
    assert bf.T >= ref.rate - bf.grid_slack


def test_brute_force_grid_containing_solver_point():
    cfg = SystemConfig(K=2, M=1, N=2)
    up = make_problem("avq/sic", block=3, cfg=cfg)
    res = solve(up)
    d = np.real(np.diag(res.D))
    grids = [np.sort(np.append(distortion_grid(up.sigma2), d[i] * (1 + 1e-9))) for i in range(2)]
    bf = brute_force_small(up, grids=grids)
    assert bf.T >= res.wsr - bf.grid_slack
    assert bf.T >= res.wsr * (1 - 1e-6)


def test_brute_force_full_access_matches_fso_only():
    cfg = SystemConfig(K=2, M=1, N=2)
    up = make_problem("avq/mmse", block=1, cfg=cfg)
    hybrid = brute_force_small(up, alpha0=1.0)
    base_up = type(up)(**{**up.__dict__, "C_rf": np.zeros(1)})
    base = brute_force_small(base_up, alpha0=1.0)
    assert hybrid.T == base.T
    assert np.all(hybrid.r <= up.C_fso)


def test_brute_force_scope():
    with pytest.raises(ValueError):
        brute_force_small(make_problem("dsc/sic"))
    with pytest.raises(ValueError):
        brute_force_small(make_problem("avq/sic", cfg=SystemConfig(M=2, N=2)))


def test_lemma_checkers_pass():
    reports = lemma_checkers(np.random.default_rng(0), trials=2000, lemma2_trials=300)
    assert [r.name for r in reports] == [
        "capacity transform M=1", "capacity transform M=2", "capacity transform M=3",
        "log-det bound equality", "log-det bound inequality"]
    assert all(r.passed for r in reports)
    assert reports[0].details["feasible"] > 0 and reports[0].details["infeasible"] > 0


def test_lemma_checkers_catch_sign_flip():
    def flipped(C_fso, C_rf):
        tc = lemma1_transform(C_fso, C_rf)
        return TransformedConstraints(tc.subsets, tc.G_m, tc.G, -tc.offset, tc.fso_only,
                                      tc.C_fso, tc.C_rf)
    reports = lemma_checkers(np.random.default_rng(0), trials=500, lemma2_trials=10,
                             transform=flipped)
    assert not all(r.passed for r in reports[:3])
    assert all(r.passed for r in reports[3:])


def test_lemma_checkers_catch_wrong_bound():
    def wrong(X, Y):
        return float(np.linalg.slogdet(Y)[1] / np.log(2))
    reports = lemma_checkers(np.random.default_rng(0), trials=10, lemma2_trials=100, value=wrong)
    # the dropped trace terms cancel at the optimum, so only the sweep can see it
    assert reports[3].passed and not reports[4].passed
