import math

import numpy as np
import pytest

from netdiff.errors import NetdiffInputError
from netdiff.global_test import (
    critical_value,
    global_statistic,
    null_cdf,
    null_quantile,
    run_global_test,
)


def test_null_quantile():
    assert null_quantile(0.05) == pytest.approx(4.7957, abs=1e-3)
    for alpha in (0.01, 0.05, 0.1):
        assert null_cdf(null_quantile(alpha)) == pytest.approx(1.0 - alpha)


def test_null_cdf():
    assert null_cdf(0.0) == pytest.approx(math.exp(-1.0 / math.sqrt(math.pi)))
    values = null_cdf(np.linspace(-5.0, 30.0, 50))
    assert np.all(np.diff(values) > 0)


def test_critical_value():
    assert critical_value(0.05, 2278) == pytest.approx(18.2125, abs=2e-3)
    assert critical_value(0.01, 2278) > critical_value(0.05, 2278)


@pytest.mark.parametrize(
    "t, expected",
    [
        pytest.param([1.0, -3.0, 2.0], (9.0, 1), id="negative_max"),
        pytest.param([1.0, -3.0, 3.0], (9.0, 1), id="tie_goes_to_first"),
        pytest.param([0.0, 0.0, 0.0], (0.0, 0), id="all_zero"),
    ],
)
def test_global_statistic(t, expected):
    assert global_statistic(t) == expected


def test_global_statistic_of_zero_links():
    with pytest.raises(NetdiffInputError):
        global_statistic([])


def test_rejects_strong_signal():
    t = np.zeros(2278)
    t[17] = 8.0
    result = run_global_test(t, alpha=0.05)
    assert result.reject
    assert result.argmax_link == 17
    assert result.m_n == 64.0
    assert result.pvalue < 1e-6
    assert result.threshold == pytest.approx(critical_value(0.05, 2278))


def test_accepts_null():
    result = run_global_test(np.random.default_rng(0).normal(size=2278) * 0.5)
    assert not result.reject
    assert result.pvalue > 0.05


@pytest.mark.parametrize("offset", [-1e-9, 0.0, 1e-9, -0.5, 0.5])
def test_pvalue_agrees_with_decision(offset):
    q = 500
    threshold = critical_value(0.05, q)
    t = np.zeros(q)
    t[0] = math.sqrt(threshold + offset)
    result = run_global_test(t, alpha=0.05)
    assert result.reject == (result.m_n >= threshold)
    assert (result.pvalue <= 0.05) == result.reject


@pytest.mark.parametrize(
    "t, alpha, q",
    [
        pytest.param([1.0, 2.0], 0.05, None, id="two_links"),
        pytest.param([1.0, 2.0, 3.0], 0.0, None, id="alpha_zero"),
        pytest.param([1.0, 2.0, 3.0], 1.0, None, id="alpha_one"),
        pytest.param([1.0, 2.0, 3.0], 0.05, 4, id="length_mismatch"),
    ],
)
def test_global_test_errors(t, alpha, q):
    with pytest.raises(NetdiffInputError):
        run_global_test(t, alpha, q)


def test_decision_duality_many():
    rng = np.random.default_rng(21)
    for _ in range(10_000):
        q = int(rng.integers(3, 80))
        alpha = float(rng.uniform(0.005, 0.3))
        threshold = critical_value(alpha, q)
        t = rng.normal(size=q)
        # put the maximum in a narrow band around the critical value
        t[rng.integers(q)] = math.sqrt(threshold + rng.normal(scale=1e-3) * rng.choice([1.0, 1e-9]))
        result = run_global_test(t, alpha)
        assert result.reject == (result.m_n >= threshold)
        assert (result.pvalue <= alpha) == result.reject
        assert 0.0 < result.pvalue <= 1.0
