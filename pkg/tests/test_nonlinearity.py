import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from rayleigh_nehari.nonlinearity import custom, log_power, power_sum

Q = 1.5

reals = st.floats(min_value=-50.0, max_value=50.0, allow_nan=False)
positive = st.floats(min_value=1e-4, max_value=50.0)


def test_power_values():
    nl = power_sum(4)
    assert nl.f(2.0) == pytest.approx(8.0)
    assert nl.f(-2.0) == pytest.approx(-8.0)
    assert nl.F(2.0) == pytest.approx(4.0)
    assert nl.fprime(2.0) == pytest.approx(12.0)


def test_power_sum_values():
    nl = power_sum(4, 3)
    assert nl.exponents == (3.0, 4.0)
    assert nl.f(2.0) == pytest.approx(4.0 + 8.0)
    assert nl.F(2.0) == pytest.approx(8.0 / 3 + 4.0)


def test_power_sum_validation():
    with pytest.raises(ValueError):
        power_sum()
    with pytest.raises(ValueError):
        power_sum(2.0)


def test_log_values():
    nl = log_power()
    assert nl.f(1.0) == pytest.approx(np.log(2.0), rel=1e-15)
    assert nl.fprime(1.0) == pytest.approx(np.log(2.0) + 0.5, rel=1e-15)
    # primitive in closed form at t = 1: ln2/2 - 1/4 + 1/2 - ln2/2 = 1/4
    assert nl.F(1.0) == pytest.approx(0.25, rel=1e-14)


def test_log_primitive_differentiates_back():
    nl = log_power()
    t, h = 2.3, 1e-5
    fd = (nl.F(t + h) - nl.F(t - h)) / (2 * h)
    assert fd == pytest.approx(nl.f(t), rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(t=reals)
def test_log_primitive_matches_quadrature(t):
    nl = log_power()
    ref, _ = quad(lambda x: x * np.log1p(abs(x)), 0.0, t, epsabs=1e-14, epsrel=1e-13)
    assert nl.F(t) == pytest.approx(ref, rel=1e-10, abs=1e-15)


def test_log_series_continuous_at_cutoff():
    nl = log_power()
    for a in (0.05 - 1e-12, 0.05, 0.05 + 1e-12):
        ref, _ = quad(lambda x: x * np.log1p(x), 0.0, a, epsabs=0.0, epsrel=1e-13)
        assert nl.F_over_t2(a) == pytest.approx(ref / a**2, rel=1e-12)


def test_log_small_argument_limit():
    nl = log_power()
    # F(t)/t^2 ~ t/3 as t -> 0
    assert nl.F_over_t2(1e-8) == pytest.approx(1e-8 / 3, rel=1e-7)
    assert nl.F_over_t2(0.0) == 0.0


@pytest.mark.parametrize("nl", [power_sum(4), power_sum(3, 4), log_power()], ids=["p4", "p34", "log"])
@settings(max_examples=100, deadline=None)
@given(t=reals)
def test_oddness(nl, t):
    assert nl.f(-t) == pytest.approx(-nl.f(t), abs=0)
    assert nl.F(-t) == pytest.approx(nl.F(t), abs=0)


@pytest.mark.parametrize("nl", [power_sum(4), power_sum(3, 4), log_power()], ids=["p4", "p34", "log"])
@settings(max_examples=100, deadline=None)
@given(t=positive)
def test_derivative_consistency(nl, t):
    h = 1e-6 * t
    fd = (nl.f(t + h) - nl.f(t - h)) / (2 * h)
    assert fd == pytest.approx(nl.fprime(t), rel=1e-6)


@pytest.mark.parametrize("nl", [power_sum(4), power_sum(3, 4), log_power()], ids=["p4", "p34", "log"])
@settings(max_examples=100, deadline=None)
@given(t=positive)
def test_auxiliary_maps_match_definitions(nl, t):
    G = nl.f(t) / t - Q * nl.F(t) / t**2
    H = nl.fprime(t) + (1 - Q) * nl.f(t) / t
    assert nl.G(Q, t) == pytest.approx(G, rel=1e-10, abs=1e-14)
    assert nl.H(Q, t) == pytest.approx(H, rel=1e-10, abs=1e-14)


@pytest.mark.parametrize("nl", [power_sum(4), log_power()], ids=["p4", "log"])
@settings(max_examples=100, deadline=None)
@given(t=positive)
def test_ft_dominates_qF(nl, t):
    assert nl.f(t) * t >= Q * nl.F(t)


def test_maps_vanish_at_zero():
    for nl in (power_sum(4), log_power()):
        assert nl.G(Q, 0.0) == 0.0
        assert nl.H(Q, 0.0) == 0.0
        assert nl.f(0.0) == 0.0
        assert nl.F(0.0) == 0.0


def test_vectorized_matches_scalar():
    nl = log_power()
    ts = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(nl.F(ts), [nl.F(float(t)) for t in ts], rtol=1e-15)
    assert isinstance(nl.F(1.0), float)


def test_non_finite_rejected():
    for nl in (power_sum(4), log_power()):
        with pytest.raises(ValueError):
            nl.f(np.inf)
        with pytest.raises(ValueError):
            nl.F(np.array([1.0, np.nan]))


def test_custom_without_primitive_integrates():
    nl = custom(lambda t: t**3, lambda t: 3 * t**2)
    np.testing.assert_allclose(nl.F(np.array([1.0, -2.0])), [0.25, 4.0], rtol=1e-12)
    assert nl.G(Q, 1.0) == pytest.approx(1.0 - Q / 4, rel=1e-12)


def test_custom_matches_builtin():
    ref = power_sum(4)
    nl = custom(lambda t: abs(t) ** 2 * t, lambda t: 3 * t**2, lambda t: t**4 / 4)
    ts = np.linspace(-2, 2, 9)
    np.testing.assert_allclose(nl.H(Q, ts), ref.H(Q, ts), rtol=1e-13)
