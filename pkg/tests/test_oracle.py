import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dupdel import oracle
from dupdel.rng import make_rng


def test_version1_two_steps_by_hand():
    # from (1): dup -> (2) w.p. theta, delete -> (1); then expand once more
    th = Fraction(3, 10)
    dist = oracle.enumerate_states(1, 0.3, 2, exact=True)
    assert dist.entries == {(3,): th * th, (1, 1): th * (1 - th), (2,): (1 - th) * th, (1,): (1 - th) ** 2}


def test_version2_first_steps():
    # step 1 always acts (N = n = 1); step 2 acts with probability N/2
    d1 = oracle.enumerate_states(2, 0.5, 1, exact=True)
    assert d1.entries == {(2,): Fraction(1, 2), (1,): Fraction(1, 2)}
    d2 = oracle.enumerate_states(2, 0.5, 2, exact=True)
    assert d2.entries[(1,)] == Fraction(1, 2) * Fraction(1, 2) + Fraction(1, 2) * Fraction(1, 2) * Fraction(1, 2)


@pytest.mark.parametrize("version", [1, 2])
@pytest.mark.parametrize("n", [0, 3, 8])
def test_probabilities_sum_to_one(version, n):
    dist = oracle.enumerate_states(version, 0.7, n, exact=True)
    assert sum(dist.entries.values()) == 1
    assert all(sum(s) <= n + 1 for s in dist.entries)


@pytest.mark.parametrize("th", ["0.3", "0.5", "0.7"])
def test_version1_mean_size_exact(th):
    for n in range(9):
        dist = oracle.enumerate_states(1, float(th), n, exact=True)
        mean = sum(p * sum(s) for s, p in dist.entries.items())
        assert mean == 1 + Fraction(th) * n


def test_enumeration_limits():
    with pytest.raises(ValueError):
        oracle.enumerate_states(1, 0.5, 9)
    with pytest.raises(ValueError):
        oracle.enumerate_states(3, 0.5, 2)


def test_float_and_exact_agree():
    a = oracle.enumerate_states(1, 0.3, 6)
    b = oracle.enumerate_states(1, 0.3, 6, exact=True)
    assert set(a.entries) == set(b.entries)
    for s in a.entries:
        assert a.entries[s] == pytest.approx(float(b.entries[s]), rel=1e-13)


def test_first_passage_closed_forms():
    # p_0(1) = theta; p_0(2) = 2/7 at theta = 1/2
    assert oracle.first_passage_solve(0.3, 1)[0] == pytest.approx(0.3)
    p = oracle.first_passage_solve(0.5, 2)
    np.testing.assert_allclose(p, [2 / 7, 4 / 7, 1.0], rtol=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=0.05, max_value=0.95), st.integers(min_value=1, max_value=60))
def test_first_passage_is_monotone(th, r):
    p = oracle.first_passage_solve(th, r)
    assert np.all(np.diff(p) > 0)
    assert p[-1] == 1.0 and 0 < p[0] < 1


def test_stationary_is_probability_vector():
    q = oracle.stationary_solve(0.5, 60)
    assert q.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(q > 0)
    with pytest.raises(ValueError):
        oracle.stationary_solve(0.5, 5)


def test_monte_carlo_first_passage():
    est = oracle.monte_carlo_first_passage(0.5, 2, 40_000, make_rng(0))
    assert abs(est.estimate - 2 / 7) <= 4 * est.stderr
    again = oracle.monte_carlo_first_passage(0.5, 2, 40_000, make_rng(0))
    assert again == est


def test_json_shapes():
    doc = json.loads(oracle.dumps(oracle.enumerate_states(1, 0.3, 2)))
    assert doc["schema_version"] == 1
    assert {"multiset": [1], "p": pytest.approx(0.49)} in doc["states"]
    doc = json.loads(oracle.dumps(oracle.first_passage_solve(0.5, 3)))
    assert len(doc["values"]) == 4
    doc = json.loads(oracle.dumps(oracle.MonteCarloEstimate(0.5, 0.1, 10, 5)))
    assert doc["hits"] == 5


def test_expected_s_r_on_known_state():
    dist = oracle.StateDistribution(1, 0, {(3, 1): 1.0})
    assert dist.expected_vertices() == 4
    assert dist.expected_s_r(1) == 3 * 2  # three vertices of degree 2
    assert dist.expected_s_r(2) == 3
    assert math.isclose(dist.total(), 1.0)
