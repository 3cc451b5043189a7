import math

import numpy as np
import pytest

from cranfso.channel import CapacityVector
from cranfso.optimizer import (GOLDEN, InfeasibleAllocation, InnerResult, SolverOptions, Variant,
                               aco_inner, closed_form_A, closed_form_B, feasible_distortion,
                               gss_outer, lemma1_transform, recover_alpha, solve,
                               solve_inner_subproblem)
from cranfso.rates import build_unified, feasibility, weighted_sum_rate
from cranfso.sysmodel import SystemConfig

from conftest import make_problem


def synthetic(a):
    return InnerResult(a, None, None, -(a - 0.3) ** 2, 1)


def fso_only(up):
    cfg = SystemConfig(M=up.M, N=up.N, K=up.K)
    caps = CapacityVector(C_fso=up.C_fso, C_rf=np.zeros(up.M))
    H = np.empty_like(up.H)
    H[:, up.order] = up.H
    mu = np.empty_like(up.mu)
    mu[up.order] = up.mu
    return build_unified(cfg, H, caps, up.pair, mu)


# -- time allocation recovery ------------------------------------------------

def test_recover_alpha_fso_covers_everything():
    a = recover_alpha([10e6, 20e6], 0.4, [30e6, 20e6], [100e6, 100e6])
    np.testing.assert_array_equal(a.alpha_m, [0.0, 0.0])
    assert a.idle == pytest.approx(0.6)
    np.testing.assert_allclose(a.vector, [0.4, 0.0, 0.0])


def test_recover_alpha_linear_inversion():
    a = recover_alpha([30e6 + 0.5 * 80e6], 0.2, [30e6], [80e6])
    assert a.alpha_m[0] == pytest.approx(0.5, rel=1e-14)
    assert a.idle == pytest.approx(0.3, rel=1e-12)


def test_recover_alpha_rejects_overbooked_frame():
    with pytest.raises(InfeasibleAllocation):
        recover_alpha([80e6, 80e6], 0.5, [0.0, 0.0], [100e6, 100e6])
    with pytest.raises(InfeasibleAllocation):
        recover_alpha([10e6], 0.5, [5e6], [0.0])


# -- golden-section search ----------------------------------------------------

def test_gss_finds_synthetic_optimum():
    res = gss_outer(None, None, SolverOptions(), inner=synthetic)
    assert abs(res.alpha0 - 0.3) <= 0.01
    assert res.iterations <= math.ceil(math.log(1 / 0.01) / math.log(GOLDEN)) + 1


def test_gss_contraction():
    res = gss_outer(None, None, SolverOptions(gss_epsilon=1e-6), inner=synthetic)
    for n, (lo, hi) in enumerate(res.intervals, start=1):
        assert hi - lo == pytest.approx((1 / GOLDEN) ** n, abs=1e-9)


def test_gss_reuses_one_probe_per_iteration():
    res = gss_outer(None, None, SolverOptions(), inner=synthetic)
    # two probes first, one per later iteration, then the midpoint
    assert len(res.probes) == res.iterations + 2


def test_gss_tie_shrinks_from_the_right():
    res = gss_outer(None, None, SolverOptions(), inner=lambda a: InnerResult(a, None, None, 0.0, 1))
    assert res.intervals[0] == (0.0, pytest.approx(1 / GOLDEN))
    assert res.alpha0 < 0.01


# -- alternating inner loop ---------------------------------------------------

@pytest.mark.parametrize("variant", list(Variant))
def test_aco_ascent(pair_name, variant):
    up = make_problem(pair_name, block=2)
    tc = lemma1_transform(up.C_fso, up.C_rf)
    res = aco_inner(0.45, up, tc, SolverOptions(variant=variant))
    h = np.array(res.history)
    assert np.all(np.diff(h) >= -1e-7 * np.abs(h[1:]))
    assert res.T == h[-1]


def test_aco_single_round_contract():
    up = make_problem("rvq/sic", block=4)
    tc = lemma1_transform(up.C_fso, up.C_rf)
    opts = SolverOptions(n_max=1)
    res = aco_inner(0.5, up, tc, opts)
    D0, _ = feasible_distortion(0.5, up, tc, up.sigma2 * np.eye(up.MN))
    ref = solve_inner_subproblem(0.5, closed_form_B(D0, up), closed_form_A(D0, up), up, tc,
                                 opts, D0, None)
    assert res.iterations == 1
    np.testing.assert_array_equal(res.D, ref.D)
    assert res.T == ref.T


def test_aco_full_access_matches_fso_only(pair_name):
    up = make_problem(pair_name, block=6)
    opts = SolverOptions()
    hybrid = aco_inner(1.0, up, lemma1_transform(up.C_fso, up.C_rf), opts)
    base_up = fso_only(up)
    base = aco_inner(1.0, base_up, lemma1_transform(base_up.C_fso, base_up.C_rf), opts)
    assert np.all(hybrid.r <= up.C_fso * (1 + 1e-6))
    assert hybrid.T == pytest.approx(base.T, abs=2 * opts.aco_epsilon_bps)


def test_aco_zero_access_time():
    up = make_problem("dsc/mmse")
    res = aco_inner(0.0, up, lemma1_transform(up.C_fso, up.C_rf), SolverOptions())
    assert res.T == 0.0


# -- full solve ----------------------------------------------------------------

def test_solve_is_consistent(pair_name):
    up = make_problem(pair_name, block=1)
    res = solve(up)
    assert feasibility(res.alpha.vector, res.D, res.r, up) == []
    assert res.wsr == pytest.approx(weighted_sum_rate(res.alpha.alpha0, res.D, up), rel=1e-12)
    # the returned surrogate is tight up to the last alternation step
    assert res.surrogate <= res.wsr * (1 + 1e-9)
    assert res.rates.sum() * 0.5 == pytest.approx(res.wsr, rel=1e-12)
    assert res.gss_iterations <= 11
    assert len(res.probes) == res.gss_iterations + 2
