import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special, stats

from endotqr.distributions import (
    AEPParams, ALParams, GIGParams, SNParams, SkewTParams, UnsupportedIndexError,
    aep_cdf, aep_logpdf, aep_sample, al_cdf, al_logdens, al_logpdf, al_moments, al_sample,
    check_loss, gig_half, gig_half_moments, gig_sample, invgamma_cdf, invgamma_draw,
    skewt_sample, sn_cdf, sn_logpdf, sn_moments, sn_sample, tn_mean, tn_sample,
)
from endotqr.samplers.chain import chain_rng

unit = st.floats(0.02, 0.98)
scale = st.floats(0.05, 20.0)
shape = st.floats(0.3, 5.0)


def _integrate(logpdf):
    f = lambda v: math.exp(logpdf(v))
    left, _ = integrate.quad(f, -np.inf, 0.0, epsabs=1e-12, epsrel=1e-10, limit=200)
    right, _ = integrate.quad(f, 0.0, np.inf, epsabs=1e-12, epsrel=1e-10, limit=200)
    return left, right


# ---------------------------------------------------------------- AL


@settings(max_examples=40, deadline=None)
@given(sigma=scale, p=unit)
def test_al_density_integrates_and_cdf_at_zero(sigma, p):
    par = ALParams(sigma, p)
    left, right = _integrate(lambda v: al_logpdf(v, par))
    assert abs(left + right - 1.0) < 1e-6
    assert abs(left - p) < 1e-6
    assert al_cdf(0.0, par) == p


@settings(max_examples=30, deadline=None)
@given(sigma=scale, p=unit, v=st.floats(-50, 50))
def test_al_density_is_check_loss_kernel(sigma, p, v):
    expect = math.log(p * (1 - p) / sigma) - float(check_loss(v, p)) / sigma
    assert math.isclose(float(al_logdens(v, sigma, p)), expect, rel_tol=1e-12, abs_tol=1e-12)


def test_al_moments_match_quadrature():
    par = ALParams(1.3, 0.2)
    f = lambda v, k: v**k * math.exp(al_logpdf(v, par))
    m1 = sum(integrate.quad(f, a, b, args=(1,))[0] for a, b in [(-np.inf, 0), (0, np.inf)])
    m2 = sum(integrate.quad(f, a, b, args=(2,))[0] for a, b in [(-np.inf, 0), (0, np.inf)])
    mean, var = al_moments(par)
    assert math.isclose(mean, m1, rel_tol=1e-8)
    assert math.isclose(var, m2 - m1**2, rel_tol=1e-8)


def test_al_sample_ks(rng):
    par = ALParams(0.7, 0.25)
    x = al_sample(par, rng, 100_000)
    assert stats.kstest(x, lambda v: al_cdf(v, par)).statistic < 0.01
    assert np.mean(x <= 0) == pytest.approx(0.25, abs=0.005)


# ---------------------------------------------------------------- SN


@settings(max_examples=40, deadline=None)
@given(phi=scale, a=unit)
def test_sn_density_integrates_and_cdf_at_zero(phi, a):
    par = SNParams(phi, a)
    left, right = _integrate(lambda v: sn_logpdf(v, par))
    assert abs(left + right - 1.0) < 1e-6
    assert abs(left - a) < 1e-6
    assert sn_cdf(0.0, par) == a


def test_sn_half_at_one_half_is_normal():
    v = np.linspace(-4, 4, 17)
    got = np.array([sn_logpdf(x, SNParams(2.0, 0.5)) for x in v])
    np.testing.assert_allclose(got, stats.norm.logpdf(v, scale=math.sqrt(2.0)), rtol=1e-12)


def test_sn_moments_and_ks(rng):
    par = SNParams(1.7, 0.3)
    x = sn_sample(par, rng, 100_000)
    assert stats.kstest(x, lambda v: sn_cdf(v, par)).statistic < 0.01
    f = lambda v, k: v**k * math.exp(sn_logpdf(v, par))
    m1 = sum(integrate.quad(f, a, b, args=(1,))[0] for a, b in [(-np.inf, 0), (0, np.inf)])
    m2 = sum(integrate.quad(f, a, b, args=(2,))[0] for a, b in [(-np.inf, 0), (0, np.inf)])
    mean, var = sn_moments(par)
    assert math.isclose(mean, m1, rel_tol=1e-8)
    assert math.isclose(var, m2 - m1**2, rel_tol=1e-8)


# ---------------------------------------------------------------- AEP


@settings(max_examples=40, deadline=None)
@given(phi=st.floats(0.1, 10), a=unit, z1=shape, z2=shape)
def test_aep_density_integrates_and_cdf_at_zero(phi, a, z1, z2):
    par = AEPParams(phi, a, z1, z2)
    left, right = _integrate(lambda v: aep_logpdf(v, par))
    assert abs(left + right - 1.0) < 1e-6
    assert abs(left - a) < 1e-6
    assert aep_cdf(0.0, par) == a


def test_aep_unit_shapes_reduce_to_al():
    phi, a = 1.6, 0.3
    v = np.linspace(-5, 5, 21)
    got = np.array([aep_logpdf(x, AEPParams(phi, a, 1.0, 1.0)) for x in v])
    np.testing.assert_allclose(got, al_logdens(v, a * (1 - a) * phi, a), rtol=1e-12)


def test_aep_sample_ks(rng):
    par = AEPParams(1.2, 0.4, 0.7, 2.5)
    x = aep_sample(par, rng, 100_000)
    assert stats.kstest(x, lambda v: aep_cdf(v, par)).statistic < 0.01


def test_density_rejects_non_finite_argument():
    with pytest.raises(ValueError):
        al_logpdf(np.inf, ALParams(1.0, 0.5))
    with pytest.raises(ValueError):
        sn_logpdf(np.nan, SNParams(1.0, 0.5))


@pytest.mark.parametrize("bad", [
    lambda: ALParams(0.0, 0.5), lambda: ALParams(1.0, 1.0), lambda: SNParams(-1.0, 0.5),
    lambda: AEPParams(1.0, 0.5, 0.0, 1.0), lambda: SNParams(1.0, 0.0),
])
def test_parameter_validation(bad):
    with pytest.raises(ValueError):
        bad()


# ---------------------------------------------------------------- GIG(1/2)


def test_gig_half_example_moment():
    # residual sqrt(8), sigma=1, p=0.5 gives xi=1, chi=sqrt(2)
    mean, _ = gig_half_moments(1.0, math.sqrt(2.0))
    assert mean == pytest.approx(1.2071, abs=1e-4)


@settings(max_examples=15, deadline=None)
@given(xi=st.floats(0.01, 30), chi=st.floats(0.05, 10))
def test_gig_half_matches_scipy_geninvgauss(xi, chi):
    x = gig_half(np.full(20_000, xi), chi, chain_rng(7, 0))
    ref = stats.geninvgauss(0.5, xi * chi, scale=xi / chi)
    assert stats.kstest(x, ref.cdf).statistic < 0.02
    m, v = gig_half_moments(xi, chi)
    assert m == pytest.approx(ref.mean(), rel=1e-8)
    assert v == pytest.approx(ref.var(), rel=1e-6)


def test_gig_half_gamma_limit(rng):
    chi = 1.5
    x = gig_half(np.zeros(100_000), chi, rng)
    assert stats.kstest(x, stats.gamma(0.5, scale=2.0 / chi**2).cdf).statistic < 0.01


def test_gig_sample_mean_three_se(rng):
    xi, chi = 0.4, 2.0
    x = gig_sample(GIGParams(0.5, xi, chi), rng, 100_000)
    m, v = gig_half_moments(xi, chi)
    assert abs(x.mean() - m) < 3 * math.sqrt(v / x.size)


def test_gig_other_index_unsupported(rng):
    with pytest.raises(UnsupportedIndexError):
        gig_sample(GIGParams(1.5, 1.0, 1.0), rng)


def test_gig_extreme_arguments_finite(rng):
    x = gig_half(np.array([1e-12, 1e8, 1.0]), np.array([1e-6, 1e-6, 1e6]), rng)
    assert np.all(np.isfinite(x)) and np.all(x > 0)


# ---------------------------------------------------------------- truncated normal


@pytest.mark.parametrize("mu,s2,lo,hi", [
    (0.0, 1.0, -np.inf, 0.0), (3.0, 0.25, -np.inf, 0.0), (10.0, 1.0, -np.inf, 0.0),
    (-1.0, 4.0, 0.5, 2.0), (0.0, 1.0, 5.0, 5.1), (40.0, 1.0, -np.inf, 0.0), (0.0, 1.0, -1.0, 1.0),
])
def test_tn_matches_closed_form_mean(mu, s2, lo, hi):
    x = tn_sample(np.full(100_000, mu), s2, lo, hi, chain_rng(3, 0))
    assert np.all(x <= hi) and np.all(x >= lo)
    assert abs(x.mean() - tn_mean(mu, s2, lo, hi)) < 4 * x.std() / math.sqrt(x.size) + 1e-12


def test_tn_ks_against_scipy(rng):
    mu, s, lo, hi = 2.0, 1.5, -np.inf, 0.0
    x = tn_sample(np.full(100_000, mu), s * s, lo, hi, rng)
    ref = stats.truncnorm((lo - mu) / s, (hi - mu) / s, loc=mu, scale=s)
    assert stats.kstest(x, ref.cdf).statistic < 0.01


def test_tn_empty_interval(rng):
    with pytest.raises(ValueError):
        tn_sample(0.0, 1.0, 1.0, 1.0, rng)


# ---------------------------------------------------------------- skew-t, IG


def test_skewt_mean_matches_closed_form(rng):
    par = SkewTParams(-0.43, 1.0, 0.98, 4.0)
    x = skewt_sample(par, rng, 400_000)
    delta = par.alpha_st / math.sqrt(1 + par.alpha_st**2)
    nu = par.nu_st
    mean = par.mu + delta * math.sqrt(nu / math.pi) * special.gamma((nu - 1) / 2) / special.gamma(nu / 2)
    assert x.mean() == pytest.approx(mean, abs=0.01)


def test_skewt_cdf_matches_density_quadrature(rng):
    # Azzalini skew-t density 2 t(x) T_{nu+1}(alpha x sqrt((nu+1)/(nu+x^2)))
    al, nu = 0.98, 4.0
    dens = lambda x: 2 * stats.t.pdf(x, nu) * stats.t.cdf(al * x * math.sqrt((nu + 1) / (nu + x * x)), nu + 1)
    x = skewt_sample(SkewTParams(0.0, 1.0, al, nu), rng, 100_000)
    for q in (-1.0, 0.43, 2.0):
        assert np.mean(x <= q) == pytest.approx(integrate.quad(dens, -np.inf, q)[0], abs=0.005)


def test_invgamma_calibration_probabilities():
    assert abs(invgamma_cdf(math.sqrt(3 / 8), 2.0, 0.5) - 0.802) <= 1e-3
    assert abs(invgamma_cdf(3.0, 1.5, 1.5) - 0.801) <= 1e-3


def test_invgamma_draw_matches_scipy(rng):
    x = invgamma_draw(np.full(100_000, 3.0), 2.0, rng)
    assert stats.kstest(x, stats.invgamma(3.0, scale=2.0).cdf).statistic < 0.01
    assert invgamma_cdf(1.1, 3.0, 2.0) == pytest.approx(stats.invgamma(3.0, scale=2.0).cdf(1.1), rel=1e-12)
