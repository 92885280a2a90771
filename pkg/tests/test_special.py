import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pseudopoisson._solve import bisect
from pseudopoisson.errors import DomainError, SeriesError
from pseudopoisson.special import (
    EULER_GAMMA,
    SeriesOptions,
    bernoulli_ratio,
    chi_square_critical,
    chi_square_sf,
    exp_integral_ei,
    lambert_w0,
    ratio_power_series,
    ratio_power_series_shifted,
    regularized_gamma_q,
)

mpmath.mp.dps = 60


def _mp_series(g, eta, a, shift=0, terms=200):
    g, eta, a = mpmath.mpf(g), mpmath.mpf(eta), mpmath.mpf(a)
    return float(mpmath.fsum((g / (g + shift + i)) ** eta * a ** i / mpmath.factorial(i) for i in range(terms)))


# -- Lambert W

def test_lambert_trivial():
    assert lambert_w0(0.0) == 0.0
    assert lambert_w0(math.e) == pytest.approx(1.0, rel=1e-15)
    assert lambert_w0(-math.exp(-1.0)) == -1.0


def test_lambert_bisection_oracle():
    r = bisect(lambda w: w * math.exp(w) + 0.2, -1.0, 0.0, rtol=1e-16)
    w = lambert_w0(-0.2)
    assert -1 < w < 0
    assert w == pytest.approx(r.x, rel=1e-12)
    assert w * math.exp(w) == pytest.approx(-0.2, rel=1e-12)


def test_lambert_roundtrip_grid():
    for w in np.linspace(-0.999, 20.0, 2000):
        assert lambert_w0(w * math.exp(w)) == pytest.approx(w, abs=1e-10)


@given(st.floats(-math.exp(-1.0) + 1e-12, 1e300))
def test_lambert_matches_mpmath(x):
    assert lambert_w0(x) == pytest.approx(float(mpmath.lambertw(x)), rel=1e-12, abs=1e-14)


def test_lambert_domain():
    with pytest.raises(DomainError):
        lambert_w0(-0.4)
    with pytest.raises(DomainError):
        lambert_w0(float("nan"))


# -- ratio-power series

def test_series_large_g_tends_to_e():
    assert ratio_power_series(1e12, 2.7, 1.0) == pytest.approx(math.e, rel=1e-9)
    assert ratio_power_series_shifted(1e12, 0.6, 2.0) == pytest.approx(math.exp(2.0), rel=1e-9)


@pytest.mark.parametrize("a", [0.1, 1.0, 3.5, 12.0])
def test_series_g1_eta1_closed_form(a):
    assert ratio_power_series(1.0, 1.0, a) == pytest.approx(math.expm1(a) / a, rel=1e-12)


def test_series_extended_precision_oracles():
    assert ratio_power_series(0.5, 2.0, 1.3) == pytest.approx(_mp_series(0.5, 2, 1.3), rel=1e-12)
    assert ratio_power_series_shifted(1.0, 1.0, 2.0) == pytest.approx(_mp_series(1, 1, 2, shift=1), rel=1e-12)


@given(st.floats(0.01, 50), st.floats(0.1, 6), st.floats(0.01, 40))
def test_series_matches_mpmath(g, eta, a):
    assert ratio_power_series(g, eta, a) == pytest.approx(_mp_series(g, eta, a, terms=250), rel=1e-11)


@given(st.floats(0.01, 50), st.floats(0.1, 6), st.floats(0.01, 20))
def test_shift_pochhammer_identity(g, eta, a):
    lhs = ratio_power_series_shifted(g, eta, a)
    rhs = (g / (g + 1)) ** eta * ratio_power_series(g + 1, eta, a)
    assert lhs == pytest.approx(rhs, rel=1e-12)
    assert lhs < ratio_power_series(g, eta, a)


def test_series_monotone_grids():
    etas = np.linspace(0.3, 5.0, 40)
    gs = np.geomspace(0.01, 100, 40)
    for a in (0.5, 3.0, 10.0):
        v = [ratio_power_series(1.3, e, a) for e in etas]
        assert np.all(np.diff(v) < 0)
        v = [ratio_power_series(g, 1.7, a) for g in gs]
        assert np.all(np.diff(v) > 0)


@pytest.mark.parametrize("eta", [1.0, 2.0, 3.0])
@pytest.mark.parametrize("a", [0.2, 2.0, 5.0])
def test_small_g_limits(eta, a):
    # the gap at g is about g**eta * (Ei(a) - ln a - Euler), so 1e-6 at
    # g = 1e-8 needs eta >= 1 and moderate a
    assert ratio_power_series(1e-8, eta, a) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("a", [0.2, 2.0, 5.0, 9.0])
def test_small_g_limit_second_series(a):
    # parameters (g + 1) over (g + 2) with eta = 1: the series with base g + 1
    assert ratio_power_series(1.0 + 1e-8, 1.0, a) == pytest.approx(math.expm1(a) / a, rel=1e-6)


def test_series_errors():
    with pytest.raises(DomainError):
        ratio_power_series(-1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        ratio_power_series(1.0, 0.0, 1.0)
    with pytest.raises(SeriesError):
        ratio_power_series(1.0, 1.0, 50.0, SeriesOptions(max_terms=5))
    with pytest.raises(ValueError):
        SeriesOptions(rel_tol=0.0)


# -- exponential integral

def test_ei_oracle():
    oracle = float(EULER_GAMMA + mpmath.fsum(mpmath.mpf(1) / (k * mpmath.factorial(k)) for k in range(1, 50)))
    assert exp_integral_ei(1.0) == pytest.approx(oracle, rel=1e-12)
    assert exp_integral_ei(1.0) == pytest.approx(1.89512, abs=1e-5)


@given(st.floats(1e-8, 600))
def test_ei_matches_mpmath(x):
    assert exp_integral_ei(x) == pytest.approx(float(mpmath.ei(x)), rel=1e-12)


def test_ei_small_x():
    x = 1e-10
    assert exp_integral_ei(x) - math.log(x) == pytest.approx(EULER_GAMMA, abs=1e-9)
    with pytest.raises(DomainError):
        exp_integral_ei(0.0)


@pytest.mark.parametrize("a", [0.05, 1.0, 4.0, 20.0])
def test_ei_series_identity(a):
    # sum_k a^k / (k k!) = sum_{i>=0} a^(i+1) / ((i+1)^2 i!) = a * ratio_power_series(1, 2, a)
    assert (exp_integral_ei(a) - EULER_GAMMA - math.log(a)) / a == pytest.approx(
        ratio_power_series(1.0, 2.0, a), rel=1e-11)


def test_euler_constant():
    assert EULER_GAMMA == float(mpmath.euler)


# -- chi-square

@pytest.mark.parametrize("df,expected", [(1, 3.84), (2, 5.99), (3, 7.815)])
def test_chi_square_critical_values(df, expected):
    assert chi_square_critical(df, 0.05) == pytest.approx(expected, abs=0.01)


@pytest.mark.parametrize("df", [1, 2, 3, 4, 7])
@pytest.mark.parametrize("level", [0.001, 0.05, 0.1, 0.5, 0.9])
def test_chi_square_inverts_sf(df, level):
    c = chi_square_critical(df, level)
    assert chi_square_sf(c, df) == pytest.approx(level, abs=1e-8)


@given(st.floats(0.1, 20), st.floats(0.0, 80))
def test_gamma_q_matches_mpmath(s, x):
    assert regularized_gamma_q(s, x) == pytest.approx(float(mpmath.gammainc(s, x, regularized=True)),
                                                      rel=1e-10, abs=1e-14)


def test_chi_square_domain():
    with pytest.raises(DomainError):
        chi_square_critical(1, 0.0)
    with pytest.raises(DomainError):
        chi_square_critical(0, 0.05)


# -- Bernoulli generating function

def test_bernoulli_ratio_values():
    assert bernoulli_ratio(0.0) == 1.0
    assert bernoulli_ratio(1.0) == pytest.approx(1.0 / (math.e - 1.0), rel=1e-15)
    assert bernoulli_ratio(1.0) == pytest.approx(0.58198, abs=1e-5)
    assert bernoulli_ratio(0.3) == pytest.approx(bernoulli_ratio(0.3, series_threshold=0.0), abs=1e-12)


@given(st.floats(-0.49, 0.49))
def test_bernoulli_series_vs_direct(z):
    direct = bernoulli_ratio(z, series_threshold=0.0)
    assert bernoulli_ratio(z) == pytest.approx(direct, rel=1e-12, abs=1e-15)


@given(st.floats(-700, 700))
def test_bernoulli_ratio_positive(z):
    v = bernoulli_ratio(z)
    assert v > 0 or (z > 700 and v == 0)
    assert math.isfinite(v)
