import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from binscore.errors import DomainError
from binscore.numerics import (
    beta_quantile,
    binom_cdf,
    binom_pmf,
    binom_pmf_all,
    binom_range_prob,
    binom_sf,
    check_seed,
    make_stream,
    reg_inc_beta,
    t_quantile,
)


def _quad_inc_beta(x, a, b):
    val, _ = integrate.quad(lambda t: t ** (a - 1) * (1 - t) ** (b - 1), 0.0, x, epsabs=1e-15, epsrel=1e-13)
    return val / special.beta(a, b)


@pytest.mark.parametrize(
    "x,a,b",
    [(0.3, 2.0, 5.0), (0.5, 1.0, 1.0), (0.9, 3.5, 1.5), (0.01, 2.0, 40.0), (0.7, 10.0, 4.0)],
)
def test_reg_inc_beta_matches_quadrature(x, a, b):
    assert reg_inc_beta(x, a, b) == pytest.approx(_quad_inc_beta(x, a, b), abs=1e-12)


def test_reg_inc_beta_endpoints_and_closed_forms():
    assert reg_inc_beta(0.0, 2.0, 3.0) == 0.0
    assert reg_inc_beta(1.0, 2.0, 3.0) == 1.0
    # I_x(1, b) = 1 - (1 - x)^b and I_x(a, 1) = x^a
    assert reg_inc_beta(0.2, 1.0, 7.0) == pytest.approx(1 - 0.8**7, abs=1e-15)
    assert reg_inc_beta(0.6, 4.0, 1.0) == pytest.approx(0.6**4, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(
    k=st.integers(0, 2**20),
    a=st.floats(0.1, 50.0),
    b=st.floats(0.1, 50.0),
)
def test_reg_inc_beta_symmetry(k, a, b):
    # dyadic x keeps 1 - x exact
    x = k / 2**20
    assert reg_inc_beta(x, a, b) + reg_inc_beta(1.0 - x, b, a) == pytest.approx(1.0, abs=1e-12)


def _bisect_quantile(q, a, b):
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if special.betainc(a, b, mid) < q:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-16:
            break
    return 0.5 * (lo + hi)


def test_beta_quantile_matches_bisection_oracle():
    rng = np.random.default_rng(11)
    for _ in range(200):
        q = rng.uniform(0.001, 0.999)
        a, b = rng.uniform(0.5, 20.0, size=2)
        assert abs(beta_quantile(q, a, b) - _bisect_quantile(q, a, b)) < 1e-10


@pytest.mark.parametrize("q,a,b", [(0.025, 1, 10000), (0.975, 13, 9988), (0.5, 0.5, 0.5), (1e-8, 2, 3)])
def test_beta_quantile_inverts_reg_inc_beta(q, a, b):
    x = beta_quantile(q, a, b)
    assert reg_inc_beta(x, a, b) == pytest.approx(q, rel=1e-10)


def test_beta_quantile_edges_and_errors():
    assert beta_quantile(0.0, 2, 3) == 0.0
    assert beta_quantile(1.0, 2, 3) == 1.0
    with pytest.raises(DomainError):
        beta_quantile(1.5, 2, 3)
    with pytest.raises(DomainError):
        beta_quantile(0.5, 0.0, 3)


def _fraction_pmf(k, n, p):
    p = Fraction(p)
    return math.comb(n, k) * p**k * (1 - p) ** (n - k)


@pytest.mark.parametrize("n,p", [(1, 0.3), (20, 0.05), (200, 0.001), (200, 0.5), (150, 0.93)])
def test_binom_cdf_against_exact_rational_sum(n, p):
    cum = Fraction(0)
    for k in range(n + 1):
        cum += _fraction_pmf(k, n, p)
        assert abs(binom_cdf(k, n, p) - float(cum)) < 1e-12


def test_binom_large_n_against_mpmath():
    n, p = 10_000, 0.001
    mpmath.mp.dps = 40
    exact = mpmath.fsum(mpmath.binomial(n, k) * mpmath.mpf(p) ** k * (1 - mpmath.mpf(p)) ** (n - k) for k in range(11))
    assert binom_cdf(10, n, p) == pytest.approx(float(exact), rel=1e-12)
    assert binom_pmf(10, n, p) == pytest.approx(
        float(mpmath.binomial(n, 10) * mpmath.mpf(p) ** 10 * (1 - mpmath.mpf(p)) ** (n - 10)), rel=1e-12
    )


def test_binom_pmf_sums_to_one_and_degenerate_p():
    assert math.fsum(binom_pmf_all(500, 0.37)) == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_array_equal(binom_pmf_all(4, 0.0), [1, 0, 0, 0, 0])
    np.testing.assert_array_equal(binom_pmf_all(4, 1.0), [0, 0, 0, 0, 1])


def test_binom_tails_partition():
    n, p = 60, 0.2
    for k in range(-1, n + 1):
        cdf = 0.0 if k < 0 else binom_cdf(k, n, p)
        assert cdf + binom_sf(k, n, p) == pytest.approx(1.0, abs=1e-14)
    assert binom_range_prob(3, 9, n, p) == pytest.approx(binom_cdf(9, n, p) - binom_cdf(2, n, p), abs=1e-14)
    with pytest.raises(DomainError):
        binom_cdf(61, n, p)


def test_t_quantile_limits():
    # one degree of freedom is the Cauchy distribution
    assert t_quantile(0.975, 1) == pytest.approx(math.tan(math.pi * 0.475), rel=1e-13)
    # two degrees of freedom: t = (2q - 1) / sqrt(2 q (1 - q))
    q = 0.9
    assert t_quantile(q, 2) == pytest.approx((2 * q - 1) / math.sqrt(2 * q * (1 - q)), rel=1e-13)
    assert t_quantile(0.975, 10**7) == pytest.approx(1.959963984540054, rel=1e-6)
    assert t_quantile(0.5, 7) == 0.0
    assert t_quantile(0.1, 9) == pytest.approx(-t_quantile(0.9, 9), rel=1e-14)


@pytest.mark.parametrize("df", [3, 30, 8992])
def test_t_quantile_against_scipy(df):
    from scipy import stats

    assert t_quantile(0.975, df) == pytest.approx(stats.t.ppf(0.975, df), rel=1e-11)


def test_streams_are_deterministic_and_distinct():
    a = make_stream(42, 3).random(5)
    b = make_stream(42, 3).random(5)
    c = make_stream(42, 4).random(5)
    d = make_stream(42, 3, domain=1).random(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_seed_validation():
    assert check_seed(2**64 - 1) == 2**64 - 1
    for bad in (-1, 2**64, 1.5, True, "3"):
        with pytest.raises(DomainError):
            check_seed(bad)
