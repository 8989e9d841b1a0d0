"""Theory evaluators against frozen high-precision references and
independent oracles."""
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dupdel import DomainError, oracle, theory

# 30-digit quadrature of the integral representations
C_REF = {
    0.3: {0: 0.65623083213216134, 1: 0.21871440253115675, 5: 0.0042552893289699143,
          20: 5.7977118314421963e-9},
    0.5: {0: 0.40365263767680593, 1: 0.21095791303041778, 5: 0.034973626906173374,
          20: 0.00066617124393014931},
    0.7: {0: 0.19787194164170981, 1: 0.12127433596968873, 5: 0.039239991435939492,
          20: 0.0069254248260212098},
}


@pytest.mark.parametrize("th", sorted(C_REF))
def test_c_frozen_values(th):
    c = theory.compute_c(th, 20)
    for k, want in C_REF[th].items():
        assert c[k] == pytest.approx(want, rel=1e-11)


def test_c_sums_to_one(theta):
    k_max = {0.3: 200, 0.5: 5000, 0.7: 10_000}[theta]
    tol = 1e-2 if theta == 0.7 else 1e-8
    assert abs(math.fsum(theory.compute_c(theta, k_max)) - 1) < tol


def test_supercritical_truncation_matches_tail():
    # the missing mass above K is the c-tail, which decays like K^(1 - beta)
    c = theory.compute_c(0.7, 2000)
    missing = 1 - math.fsum(c)
    k = np.arange(2001, 400_001, dtype=float)
    approx_tail = float(np.sum(theory.asympt_c(0.7, k)))
    assert missing == pytest.approx(approx_tail, rel=0.05)


def test_recursion_residuals(theta):
    c = theory.compute_c(theta, 101)
    assert theory.c_recursion_residual(theta, c).max() < 1e-10
    q = theory.compute_q(theta, 101, method="integral")
    assert theory.q_recursion_residual(theta, q).max() < 1e-10
    a = theory.compute_a(theta, 101).a
    assert theory.a_recursion_residual(theta, a).max() < 1e-12


def test_q_methods_agree(theta):
    qc = theory.compute_q(theta, 100, method="from_c")
    qi = theory.compute_q(theta, 100, method="integral")
    np.testing.assert_allclose(qc, qi, rtol=1e-9)


def test_q_matches_stationary_solve(theta):
    q = theory.compute_q(theta, 40)
    qs = oracle.stationary_solve(theta, 400 if theta == 0.7 else 200)
    np.testing.assert_allclose(q[:41], qs[:41], rtol=1e-8, atol=1e-14)


def test_tail_is_sum_of_q():
    for th in (0.3, 0.5):
        q = theory.compute_q(th, 400)
        for k in (1, 3, 10):
            assert theory.tail_q(th, k) == pytest.approx(math.fsum(q[k:]), rel=1e-9)


def test_critical_tail_is_shifted_c():
    c = theory.compute_c(0.5, 10)
    np.testing.assert_allclose(theory.tail_q(0.5, np.arange(1, 11)), c[:10], rtol=1e-13)


def test_a_small_values_exact():
    # a_r at 1/2 is L_r(-1): 1, 2, 7/2, 17/3, 209/24
    a = theory.compute_a(0.5, 4).a
    want = [Fraction(1), Fraction(2), Fraction(7, 2), Fraction(17, 3), Fraction(209, 24)]
    np.testing.assert_allclose(a, [float(x) for x in want], rtol=1e-15)


def test_laguerre_forms_agree():
    for r in range(0, 40):
        assert theory.laguerre_poly(r, -1.0) == pytest.approx(theory.laguerre_explicit(r, -1.0), rel=1e-13)
    a = theory.compute_a(0.5, 100).a
    lag = np.array([theory.laguerre_eval(r, 1.0) for r in range(101)])
    np.testing.assert_allclose(a, lag, rtol=1e-12)


@pytest.mark.parametrize("th", [0.2, 0.3, 0.7, 0.9])
def test_binomial_sum(th):
    a = theory.compute_a(th, 30).a
    got = [theory.a_binomial_sum(th, r) for r in range(31)]
    np.testing.assert_allclose(got, a, rtol=1e-10)


def test_binomial_sum_undefined_at_half():
    with pytest.raises(DomainError):
        theory.a_binomial_sum(0.5, 3)


def test_p0_matches_linear_solve(theta):
    p0 = theory.compute_a(theta, 50).p0
    for r in (1, 2, 7, 50):
        assert oracle.first_passage_solve(theta, r)[0] == pytest.approx(p0[r], rel=1e-12)


def test_log_a_survives_overflow():
    surv = theory.compute_a(0.1, 2000)
    assert np.all(np.isfinite(surv.log_a))
    assert np.isinf(surv.a[-1])
    assert surv.p0[-1] == 0.0 or surv.p0[-1] < 1e-300


@pytest.mark.parametrize("th", [0.3, 0.5, 0.7])
def test_asymptotics_improve(th):
    ks = np.array([100.0, 1000.0])
    for log_exact, log_approx in [
        (theory.log_c(th, ks), theory.log_asympt_c(th, ks)),
        (theory.log_tail_q(th, ks), theory.log_tail_q_asympt(th, ks)),
        (-theory.compute_a(th, 1000).log_a[[100, 1000]], theory.log_p0_asympt(th, ks)),
    ]:
        dev = np.abs(np.expm1(log_exact - log_approx))
        assert dev[1] < dev[0] and dev[1] < 0.2


def test_subcritical_constant_at_large_k():
    ks = np.array([1e4])
    ratio = float(np.exp(theory.log_c(0.3, ks) - theory.log_asympt_c(0.3, ks))[0])
    assert ratio == pytest.approx(1.0, abs=1e-3)


def test_laguerre_asymptotic():
    dev = [abs(theory.laguerre_eval(r, 1.0) / float(theory.laguerre_asympt(r, 1.0)) - 1) for r in (100, 400, 1600)]
    assert dev[0] > dev[1] > dev[2]
    assert dev[2] < 0.02


def test_expected_size():
    assert theory.expected_size(1, 0.3, 10) == pytest.approx(4.0)
    es = theory.es_n_r_exact(0.4, 50, 1)
    assert theory.expected_size(2, 0.4, 50) == pytest.approx(es[50, 0], rel=1e-12)
    assert theory.expected_size(3, 0.4, 2.5) == pytest.approx(math.exp(1.0))


def test_es_matches_enumeration(theta):
    es = theory.es_n_r_exact(theta, 6, 3)
    for n in range(1, 7):
        dist = oracle.enumerate_states(2, theta, n)
        for r in range(4):
            assert abs(dist.expected_s_r(r) - es[n, r]) < 1e-12


def test_es_bounds_hold_below_and_at_criticality():
    n = np.arange(1, 2001)
    for th in (0.2, 0.3, 0.5):
        es = theory.es_n_r_exact(th, 2000, 5)
        for r in range(6):
            assert np.all(es[1:, r] <= theory.es_n_r_bound(th, n, r))


def test_supercritical_bound_form():
    form = theory.es_n_r_bound(0.7, 10, 2)
    assert form.exponent == pytest.approx(1.2)
    assert not form.log_correction
    assert theory.es_n_r_bound(0.6, 10, 2).log_correction  # r = beta - 1


def test_maxdeg_constants():
    sub = theory.maxdeg_bound_constants(0.3)
    assert sub.scale == "log" and sub.lower < sub.upper
    crit = theory.maxdeg_bound_constants(0.5)
    assert (crit.lower, crit.upper) == (1 / 16, 9 / 4)
    sup = theory.maxdeg_bound_constants(0.7)
    assert sup.scale == "power" and sup.upper == pytest.approx(1 / 1.75)


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=0.05, max_value=0.95).filter(lambda t: abs(t - 0.5) > 1e-3))
def test_q_is_a_probability_vector(th):
    q = theory.compute_q(th, 60)
    assert np.all(q > 0)
    assert math.fsum(q) <= 1 + 1e-9
    # q_0 equals gamma (1 - c_0) in every regime
    c0 = theory.compute_c(th, 1)[0]
    assert q[0] == pytest.approx((1 - th) / th * (1 - c0), rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=0.05, max_value=0.95), st.integers(min_value=2, max_value=200))
def test_a_recursion_property(th, r):
    a = theory.compute_a(th, r).a
    assert np.all(np.diff(a) > 0)  # reaching a higher degree is never easier
    assert theory.a_recursion_residual(th, a).max() < 1e-12


def test_monotone_probabilities(theta):
    p0 = theory.compute_a(theta, 200).p0
    assert np.all(np.diff(p0) < 0) and np.all((p0[1:] > 0) & (p0[1:] < 1))
    tails = theory.tail_q(theta, np.arange(1, 200))
    assert np.all(np.diff(tails) < 0) and np.all((tails > 0) & (tails < 1))
