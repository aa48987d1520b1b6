import math

import mpmath
import numpy as np
import pytest

from learncurve.errors import DomainError
from learncurve.specialmath import (
    EULER_GAMMA,
    digamma,
    gamma_fn,
    ln_gamma,
    std_normal_cdf,
    std_normal_quantile,
)

GRID = np.round(np.arange(0.5, 20.0001, 0.1), 10)


@pytest.mark.parametrize(
    "z, expected",
    [(0.5, math.sqrt(math.pi)), (1.0, 1.0), (1.5599, 0.88963109525021150)],
)
def test_gamma_values(z, expected):
    assert gamma_fn(z) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("z", [0.5, 0.77, 1.3, 4.2, 11.5, 27.0, 49.9])
def test_gamma_against_mpmath(z):
    assert gamma_fn(z) == pytest.approx(float(mpmath.gamma(z)), rel=1e-12)
    assert digamma(z) == pytest.approx(float(mpmath.digamma(z)), abs=1e-10)


def test_ln_gamma_values():
    assert ln_gamma(1.0) == 0.0
    assert ln_gamma(2.0) == pytest.approx(0.0, abs=1e-15)
    assert ln_gamma(10.0) == pytest.approx(math.log(362880.0), rel=1e-14)


def test_digamma_values():
    assert digamma(1.0) == pytest.approx(-EULER_GAMMA, abs=1e-12)
    assert digamma(2.0) == pytest.approx(1.0 - EULER_GAMMA, abs=1e-12)
    assert digamma(0.5) == pytest.approx(-EULER_GAMMA - 2 * math.log(2.0), abs=1e-12)


@pytest.mark.parametrize("fn", [gamma_fn, ln_gamma, digamma])
@pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
def test_domain_errors(fn, bad):
    with pytest.raises(DomainError):
        fn(bad)


def test_log_gamma_consistency_and_recurrences():
    for z in GRID:
        g = gamma_fn(z)
        assert abs(g - math.exp(ln_gamma(z))) / g <= 1e-12
        assert gamma_fn(z + 1) == pytest.approx(z * g, rel=1e-10)
        assert digamma(z + 1) == pytest.approx(digamma(z) + 1.0 / z, abs=1e-10)


def test_digamma_is_derivative_of_ln_gamma():
    h = 1e-5
    for z in GRID:
        fd = (ln_gamma(z + h) - ln_gamma(z - h)) / (2 * h)
        assert fd == pytest.approx(digamma(z), abs=1e-6)


def test_normal_cdf_values():
    assert std_normal_cdf(0.0) == 0.5
    assert std_normal_cdf(1.959964) == pytest.approx(0.97500000090355760, abs=1e-12)
    assert std_normal_cdf(-8.0) < 1e-14
    assert std_normal_cdf(-8.0) == pytest.approx(6.2209605742717841e-16, rel=1e-9)
    for z in np.linspace(-9, 9, 37):
        assert std_normal_cdf(z) + std_normal_cdf(-z) == pytest.approx(1.0, abs=1e-15)


def test_normal_cdf_rejects_nan():
    with pytest.raises(DomainError):
        std_normal_cdf(math.nan)


def test_normal_quantile_values():
    assert std_normal_quantile(0.5) == 0.0
    assert std_normal_quantile(0.975) == pytest.approx(1.959963984540054, abs=1e-12)
    assert std_normal_quantile(0.95) == pytest.approx(1.6448536269514722, abs=1e-12)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
def test_normal_quantile_domain(p):
    with pytest.raises(DomainError):
        std_normal_quantile(p)


def test_quantile_round_trip():
    for z in np.linspace(-5, 5, 201):
        assert std_normal_quantile(std_normal_cdf(z)) == pytest.approx(z, abs=1e-8)
    for p in [1e-12, 1e-6, 0.01, 0.3, 0.7, 0.99, 1 - 1e-9]:
        assert abs(std_normal_cdf(std_normal_quantile(p)) - p) <= 1e-10
