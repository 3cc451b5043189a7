import math

import numpy as np
import pytest

from cranfso.optimizer import (closed_form_A, closed_form_B, lemma1_transform, lemma2_value,
                               rate_upper_bound, surrogate_objective)
from cranfso.rates import Quantizer, pattern_mask, weighted_sum_rate

from conftest import make_problem, random_hermitian_pd

LN2 = math.log(2.0)


def alpha_exists(r, a0, C_fso, C_rf):
    return np.maximum((r - C_fso) / C_rf, 0.0).sum() <= 1.0 - a0


def test_single_ru_reduces_to_capacity_constraint():
    tc = lemma1_transform([30e6], [200e6])
    for a0 in (0.0, 0.3, 0.9):
        cap = (1 - a0) * 200e6 + 30e6
        assert tc.satisfied([cap * (1 - 1e-12)], a0)
        assert not tc.satisfied([cap * (1 + 1e-9)], a0)


def test_two_ru_full_set_row():
    C_fso, C_rf = np.array([30e6, 10e6]), np.array([100e6, 250e6])
    tc = lemma1_transform(C_fso, C_rf)
    assert tc.subsets == ((0,), (1,), (0, 1))
    i = tc.subsets.index((0, 1))
    np.testing.assert_allclose(tc.G_m[i], [C_rf[1], C_rf[0]])
    assert tc.G[i] == C_rf[0] * C_rf[1]
    assert tc.offset[i] == pytest.approx(C_rf[1] * C_fso[0] + C_rf[0] * C_fso[1], rel=1e-15)
    A, b = tc.rows(0.25)
    # rows are divided by G(S)
    np.testing.assert_allclose(A[i], [1 / C_rf[0], 1 / C_rf[1]])
    assert b[i] == pytest.approx(0.75 + C_fso[0] / C_rf[0] + C_fso[1] / C_rf[1], rel=1e-15)


@pytest.mark.parametrize("M", [1, 2, 3])
def test_transform_matches_time_existence(M):
    rng = np.random.default_rng(M)
    mismatches = 0
    for _ in range(2000):
        C_rf = rng.uniform(10e6, 400e6, M)
        C_fso = rng.uniform(0, 80e6, M)
        a0 = rng.uniform()
        r = rng.uniform(0, 1.5 * (C_fso + (1 - a0) * C_rf / M))
        mismatches += lemma1_transform(C_fso, C_rf).satisfied(r, a0) != alpha_exists(r, a0, C_fso, C_rf)
    assert mismatches == 0


def test_zero_rf_capacity_keeps_fso_bound():
    tc = lemma1_transform([30e6, 20e6], [0.0, 100e6])
    assert tc.fso_only == (0,)
    assert tc.subsets == ((1,),)
    assert tc.satisfied([30e6, 20e6 + 49e6], 0.5)
    assert not tc.satisfied([30e6, 20e6 + 51e6], 0.5)
    assert not tc.satisfied([31e6, 0.0], 0.5)


def test_lemma2_identity_case():
    assert lemma2_value(np.eye(3), np.eye(3)) == pytest.approx(0.0, abs=1e-15)


def test_lemma2_optimum_and_bound(rng):
    for _ in range(200):
        X = random_hermitian_pd(rng, 4)
        Xi = np.linalg.inv(X)
        target = -np.linalg.slogdet(X)[1] / LN2
        assert lemma2_value(X, Xi) == pytest.approx(target, abs=1e-9)
        Y = random_hermitian_pd(rng, 4, rng.uniform(0.1, 3))
        assert lemma2_value(X, Y) <= target + 1e-9


def test_closed_form_B_without_distortion():
    up = make_problem("avq/sic", cfg=None)
    B = closed_form_B(np.zeros((up.MN, up.MN)), up)
    # last decoded user sees no interference
    np.testing.assert_allclose(B[-1], np.eye(up.MN) / up.sigma2, rtol=1e-12)


def test_closed_form_B_inverts(rng, pair_name):
    up = make_problem(pair_name, block=3)
    q = Quantizer(pair_name.split("/")[0])
    D = np.where(pattern_mask(q, up.M, up.N), random_hermitian_pd(rng, up.MN, up.sigma2), 0)
    B = closed_form_B(D, up)
    for k in range(up.K):
        np.testing.assert_allclose(B[k] @ (up.W[k] + D), np.eye(up.MN), atol=1e-9)
    # the bound is tight at B, so the surrogate equals the weighted sum rate
    assert surrogate_objective(0.6, D, B, up) == pytest.approx(weighted_sum_rate(0.6, D, up),
                                                               rel=1e-8)


def test_surrogate_is_a_lower_bound(rng):
    up = make_problem("rvq/mmse", block=1)
    D = up.sigma2 * np.eye(up.MN)
    B = closed_form_B(2.0 * D, up)
    assert surrogate_objective(0.5, D, B, up) < weighted_sum_rate(0.5, D, up)


def test_closed_form_A_without_signal():
    up = make_problem("rvq/mmse")
    up_zero = type(up)(**{**up.__dict__, "C": tuple(np.zeros_like(C) for C in up.C)})
    A = closed_form_A(np.zeros((up.MN, up.MN)), up_zero)
    for Ai in A:
        np.testing.assert_allclose(Ai, np.eye(Ai.shape[0]) / up.sigma2, rtol=1e-12)


def test_rate_bound_tight_and_valid(rng):
    up = make_problem("dsc/mmse", block=2)
    D = random_hermitian_pd(rng, up.MN, up.sigma2)
    A = closed_form_A(D, up)
    for S, Ai, C in zip(up.subsets, A, up.C):
        idx = up.antennas(S)
        DS = D[np.ix_(idx, idx)]
        exact = (np.linalg.slogdet(C + DS + up.sigma2 * np.eye(idx.size))[1]
                 - np.linalg.slogdet(DS)[1]) / LN2
        assert rate_upper_bound(S, D, Ai, up) == pytest.approx(exact, rel=1e-9)
        for _ in range(50):
            other = random_hermitian_pd(rng, idx.size, rng.uniform(0.1, 10) / up.sigma2)
            assert rate_upper_bound(S, D, other, up) >= exact - 1e-9 * abs(exact)
