import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from endotqr.distributions import al_logdens
from endotqr.dp_mixture import (
    NumericalDegeneracyError, StickState, alloc_logdens, alloc_probs, cluster_scale_params_aldp,
    cluster_scale_params_sndp, coverage_ok, extend_sticks, precision_mixture,
    precision_sticks_params, stick_beta_params, stick_weights, update_alloc,
    update_cluster_scales_sndp, update_precision_a, update_precision_sticks, update_slice_u,
    update_sticks,
)
from endotqr.model import theta_tau
from endotqr.samplers.chain import chain_rng


@settings(max_examples=50)
@given(omega=arrays(float, st.integers(1, 30), elements=st.floats(0.0, 1.0)))
def test_stick_weights_sum_to_at_most_one(omega):
    pi = stick_weights(omega)
    assert np.all(pi >= 0)
    assert pi.sum() <= 1.0 + 1e-12
    assert math.isclose(1.0 - pi.sum(), float(np.prod(1.0 - omega)), abs_tol=1e-12)


def test_slice_u_support_and_mean(rng):
    k = np.zeros(200_000, dtype=np.intp)
    u = update_slice_u(k, np.array([0.4, 0.6]), rng)
    assert np.all((u >= 0) & (u < 0.4))
    assert u.mean() == pytest.approx(0.2, abs=4 * 0.4 / math.sqrt(12 * u.size))
    u1 = update_slice_u(np.zeros(10, np.intp), np.array([1.0]), rng)
    assert np.all(u1 < 1.0)


def test_slice_u_rejects_zero_weight(rng):
    with pytest.raises(NumericalDegeneracyError):
        update_slice_u(np.array([1]), np.array([1.0, 0.0]), rng)


def test_stick_posterior_parameters():
    a1, b1 = stick_beta_params(np.array([0, 0, 0]), 2.0, 1)
    assert a1.tolist() == [4.0] and b1.tolist() == [2.0]
    a1, b1 = stick_beta_params(np.array([0, 2, 2, 1]), 1.5, 4)
    np.testing.assert_array_equal(a1, [2.0, 2.0, 3.0, 1.0])
    np.testing.assert_array_equal(b1, [3 + 1.5, 2 + 1.5, 0 + 1.5, 0 + 1.5])


def test_stick_mean_oracle():
    r = chain_rng(1, 0)
    draws = np.array([update_sticks(np.array([0, 0, 0]), 2.0, 1, r)[0] for _ in range(20_000)])
    sd = math.sqrt(4 * 2 / (36 * 7))
    assert draws.mean() == pytest.approx(4 / 6, abs=4 * sd / math.sqrt(draws.size))


def _no_sticks():
    # extension starting from an empty list, i.e. a pure prior draw of the sticks
    return SimpleNamespace(omega=np.empty(0), phi_clusters=np.empty(0))


def test_extend_sticks_nearly_vacuous_slice(rng):
    ks = [extend_sticks(_no_sticks(), 0.99, 1.0, (2.0, 0.5), rng).k_star for _ in range(200)]
    assert np.mean(np.array(ks) == 1) > 0.95


@settings(max_examples=40, deadline=None)
@given(u_min=st.floats(1e-6, 0.999), a=st.floats(0.1, 10.0), seed=st.integers(0, 2**32))
def test_extend_sticks_covers_slice(u_min, a, seed):
    r = chain_rng(seed, 0)
    out = extend_sticks(_no_sticks(), u_min, a, (2.0, 0.5), r)
    assert coverage_ok(out, [u_min])
    assert len(out.omega) == len(out.phi_clusters) >= out.k_star


def test_extend_sticks_keeps_existing_and_mean_k_star():
    r = chain_rng(2, 0)
    ks = [extend_sticks(_no_sticks(), math.exp(-5), 1.0, (2.0, 0.5), r).k_star for _ in range(10_000)]
    # k* - 1 is Poisson(5) because -log(1 - omega) ~ Exp(1) when a = 1
    assert np.mean(ks) == pytest.approx(6.0, abs=0.1)
    start = StickState(np.array([0.3, 0.5]), np.array([1.0, 2.0]), 2)
    out = extend_sticks(start, 1e-3, 1.0, (2.0, 0.5), r)
    np.testing.assert_array_equal(out.omega[:2], [0.3, 0.5])
    np.testing.assert_array_equal(out.phi_clusters[:2], [1.0, 2.0])


def test_alloc_single_admissible_cluster(rng):
    st_ = StickState(np.array([0.5, 0.5, 1.0]), np.array([1.0, 2.0, 3.0]), 3)
    u = np.full(50, 0.45)  # only the first cluster has pi > 0.45
    k = update_alloc(np.linspace(-1, 1, 50), st_, u, 0.3, "al", rng)
    assert np.all(k == 0)


def test_alloc_equal_scales_symmetric():
    st_ = StickState(np.array([0.5, 1.0]), np.array([2.0, 2.0]), 2)
    prob = alloc_probs(np.array([0.3, -2.0]), st_, np.full(2, 0.1), 0.4, "sn")
    np.testing.assert_allclose(prob, 0.5)


def test_alloc_two_scale_example():
    st_ = StickState(np.array([0.5, 1.0]), np.array([1.0, 100.0]), 2)
    prob = alloc_probs(np.array([0.1]), st_, np.array([0.01]), 0.5, "al")
    f1, f2 = 0.25 * math.exp(-0.05), 0.0025 * math.exp(-0.0005)
    assert prob[0, 0] == pytest.approx(f1 / (f1 + f2), rel=1e-12)
    assert prob[0, 0] == pytest.approx(0.9896, abs=1e-4)


def test_alloc_empty_admissible_set_raises(rng):
    st_ = StickState(np.array([0.5, 0.5]), np.array([1.0, 1.0]), 2)
    with pytest.raises(NumericalDegeneracyError):
        alloc_probs(np.array([0.0]), st_, np.array([0.9]), 0.5, "al")


def test_alloc_stationary_frequencies():
    # alternating u | k and k | u leaves Pr(k = l) proportional to pi_l f_l(v)
    r = chain_rng(3, 0)
    omega = np.array([0.3, 1.0])
    st_ = StickState(omega, np.array([0.5, 4.0]), 2)
    pi = stick_weights(omega)
    v = np.full(100_000, 0.8)
    k = np.zeros(v.size, dtype=np.intp)
    for _ in range(30):
        u = update_slice_u(k, pi, r)
        k = update_alloc(v, st_, u, 0.4, "al", r)
    f = pi * np.exp(al_logdens(0.8, st_.phi_clusters, 0.4))
    target = f[0] / f.sum()
    assert np.mean(k == 0) == pytest.approx(target, abs=4 * math.sqrt(target * (1 - target) / v.size))


@settings(max_examples=30)
@given(v=arrays(float, 8, elements=st.floats(-5, 5)), perm_seed=st.integers(0, 1000))
def test_label_permutation_leaves_likelihood(v, perm_seed):
    r = np.random.default_rng(perm_seed)
    phis = r.uniform(0.2, 5.0, 4)
    k = r.integers(0, 4, v.size)
    perm = r.permutation(4)
    inv = np.argsort(perm)
    ll = alloc_logdens(v, phis, 0.3, "sndp")[np.arange(v.size), k].sum()
    ll_perm = alloc_logdens(v, phis[perm], 0.3, "sndp")[np.arange(v.size), inv[k]].sum()
    assert ll == pytest.approx(ll_perm, rel=1e-12, abs=1e-12)


def test_cluster_scale_params_aldp_examples():
    base = (2.0, 0.5)
    shape, rate = cluster_scale_params_aldp(np.array([0.4, -0.2]), np.array([1.0, 2.0]), np.array([1, 1]), 0.3, base, 3)
    assert shape[1] == 3 + base[0] and shape[0] == base[0] and rate[0] == base[1]
    tt = theta_tau(0.5)
    _, rate = cluster_scale_params_aldp(np.array([tt.theta * 1.0]), np.array([1.0]), np.array([0]), 0.5, base, 1)
    assert rate[0] == 1.0 + base[1]


def test_cluster_scale_params_sndp_examples():
    base = (1.5, 1.5)
    shape, rate = cluster_scale_params_sndp(np.array([0.0]), np.array([0]), 0.3, base, 1)
    assert shape[0] == 0.5 + 1.5 and rate[0] == 1.5
    _, rate = cluster_scale_params_sndp(np.array([-1.0]), np.array([0]), 0.5, base, 1)
    assert rate[0] == 1.5 + 0.5


def test_empty_clusters_draw_from_base():
    r = chain_rng(4, 0)
    draws = np.array([update_cluster_scales_sndp(np.array([0.3]), np.array([0]), 0.5, (3.0, 2.0), r, k_star=2)[1]
                      for _ in range(40_000)])
    # IG(3, 2) has mean 1 and variance 1
    assert draws.mean() == pytest.approx(1.0, abs=4 / math.sqrt(draws.size))


def test_precision_mixture_odds_example():
    weight, shapes, rate = precision_mixture(1, 10, 2.0, 2.0, math.exp(-1))
    assert weight / (1 - weight) == pytest.approx(2 / 30, rel=1e-12)
    assert shapes == (3.0, 2.0) and rate == pytest.approx(3.0)


def test_precision_update_prior_domination():
    r = chain_rng(5, 0)
    draws = [update_precision_a(3, 50, (2.0, 1e6), 1.0, r) for _ in range(2000)]
    assert np.mean(draws) < 1e-4
    with pytest.raises(ValueError):
        update_precision_a(0, 5, (2.0, 2.0), 1.0, r)


def test_precision_given_sticks_is_gamma_posterior():
    # omega_l ~ B(1, a) has density a (1 - omega)^(a - 1); conjugate to a Gamma prior
    omega = np.array([0.2, 0.5, 0.9])
    shape, rate = precision_sticks_params(omega, (2.0, 2.0))
    assert shape == 5.0
    assert rate == pytest.approx(2.0 - np.log(0.8 * 0.5 * 0.1), rel=1e-12)
    r = chain_rng(6, 0)
    draws = np.array([update_precision_sticks(omega, (2.0, 2.0), r) for _ in range(40_000)])
    assert draws.mean() == pytest.approx(shape / rate, abs=4 * math.sqrt(shape) / rate / math.sqrt(draws.size))
