import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from hdqkd.homodyne import DetectionPolicy, abandonment_rate, qber, quadrature_sd


def mp_qber(eta, mu, x):
    s = mpmath.sqrt(2 * mpmath.mpf(eta) * mpmath.mpf(mu))
    return 0.5 * mpmath.erfc(s * (1 + mpmath.mpf(x)))


def mp_bar(eta, mu, x):
    s = mpmath.sqrt(2 * mpmath.mpf(eta) * mpmath.mpf(mu))
    return 0.5 * mpmath.erfc(s * (1 - mpmath.mpf(x))) - mp_qber(eta, mu, x)


def test_qber_examples():
    # zero signal: erfc(0) = 1, so half the bits are wrong
    assert qber(1, 0, 0) == 0.5
    assert qber(1e-12, 1e-12, 0) == pytest.approx(0.5)
    assert qber(1, 1.65, 0) == pytest.approx(5.0989383881201222e-3, rel=1e-13)
    assert qber(1, 1.65, 0.9) == pytest.approx(5.2724225252126913e-7, rel=1e-12)


def test_abandonment_examples():
    for eta, mu in [(1, 1.65), (0.3, 0.2), (0.9, 5)]:
        assert abandonment_rate(eta, mu, 0) == 0.0
    assert abandonment_rate(1, 1.65, 2) == pytest.approx(0.99490106161187344, rel=1e-13)
    assert abandonment_rate(1, 1.65, 0.9) == pytest.approx(0.39862566257671820, rel=1e-13)


@given(st.floats(1e-3, 1), st.floats(1e-3, 5), st.floats(0, 5))
def test_erfc_accuracy_against_mpmath(eta, mu, x):
    e = qber(eta, mu, x)
    ref = float(mp_qber(eta, mu, x))
    if ref > 1e-300:
        assert e == pytest.approx(ref, rel=1e-12)
    a_ref = float(mp_bar(eta, mu, x))
    assert abandonment_rate(eta, mu, x) == pytest.approx(a_ref, rel=1e-12, abs=1e-15)


@given(st.floats(1e-3, 1), st.floats(1e-3, 5), st.floats(0, 5))
def test_qber_plus_bar_identity(eta, mu, x):
    s = math.sqrt(2 * eta * mu)
    assert qber(eta, mu, x) + abandonment_rate(eta, mu, x) == pytest.approx(
        0.5 * math.erfc(s * (1 - x)), rel=1e-14, abs=1e-300)


@given(st.floats(0.01, 0.9), st.floats(0.01, 3), st.floats(0, 3), st.floats(0.01, 0.1))
def test_qber_decreasing(eta, mu, x, frac):
    base = qber(eta, mu, x)
    if base < 1e-250:
        return
    assert qber(eta * (1 + frac), mu, x) < base
    assert qber(eta, mu * (1 + frac), x) < base
    assert qber(eta, mu, x + frac) < base


def test_bar_increasing_and_good_fraction_decreasing():
    xs = np.linspace(0, 4, 401)
    for eta, mu in [(1, 1.65), (0.2, 1.65), (0.5, 0.5)]:
        a = abandonment_rate(eta, mu, xs)
        e = qber(eta, mu, xs)
        assert np.all(np.diff(a) > 0)
        assert np.all(np.diff(1 - a - e) < 0)


def test_quadrature_sd():
    assert quadrature_sd(1, 0.25) == 1.0
    assert quadrature_sd(1, 1.65) == pytest.approx(0.38924947208076149, rel=1e-14)
    with pytest.raises(ValueError):
        quadrature_sd(1, 0)


def test_quadrature_sd_consistency():
    rng = np.random.default_rng(5)
    for eta, mu, x in zip(rng.uniform(0.01, 1, 100), rng.uniform(0.01, 5, 100), rng.uniform(0, 3, 100)):
        sd = quadrature_sd(eta, mu)
        assert 0.5 * math.erfc((1 + x) / (sd * math.sqrt(2))) == pytest.approx(qber(eta, mu, x), rel=1e-10)


@pytest.mark.parametrize("eta, mu, x", [(1, 1.65, 0.9), (0.3, 1.0, 0.5), (0.5, 0.3, 1.5)])
def test_gaussian_draws_reproduce_e_and_a(eta, mu, x):
    n = 10**6
    out = 1 + quadrature_sd(eta, mu) * np.random.default_rng(11).standard_normal(n)
    e, a = qber(eta, mu, x), abandonment_rate(eta, mu, x)
    for obs, p in [((out < -x).mean(), e), (((out > -x) & (out < x)).mean(), a)]:
        assert abs(obs - p) <= 3 * math.sqrt(p * (1 - p) / n) + 1 / n


def test_policy_validation():
    with pytest.raises(ValueError):
        DetectionPolicy(-0.1)
    with pytest.raises(ValueError):
        DetectionPolicy(0.5, "nope")
