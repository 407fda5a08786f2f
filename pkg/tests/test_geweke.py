import numpy as np
import pytest

from endotqr.distributions import invgamma_draw
from endotqr.geweke import FUNCTIONALS, JointSimulator, covariates, geweke_test, geweke_z, tight_priors
from endotqr.samplers import kernels as K
from endotqr.samplers.chain import chain_rng


def test_geweke_z_zero_for_identical_samples(rng):
    x = rng.standard_normal((4000, 3))
    z, ifs = geweke_z(x, x.copy())
    np.testing.assert_array_equal(z, 0.0)
    assert np.all(ifs > 0)


def test_prior_state_and_data_are_consistent():
    sim = JointSimulator("sndp", 0.3, covariates(20, chain_rng(0, 0)), tight_priors())
    r = chain_rng(0, 1)
    state = sim.draw_prior_state(r)
    ds = sim.draw_data(state, r)
    np.testing.assert_array_equal(ds.y, np.maximum(state.ystar, 0.0))
    assert state.k_alloc.max() < len(state.omega) and len(sim.functionals(state)) == 10
    with pytest.raises(ValueError):
        JointSimulator("tqr", 0.5, ds, tight_priors())


@pytest.mark.parametrize("family", ["al", "sn", "aep", "aldp", "sndp"])
def test_short_run_is_finite(family):
    res = geweke_test(family, draws=600, seed=4, adapt=200)
    assert res.names == FUNCTIONALS[family] and np.all(np.isfinite(res.z))
    assert len(res.table().splitlines()) == 10


def test_detects_off_by_one_sigma_shape(monkeypatch):
    def wrong(state, ds, shape0, scale0, tt, rng, Xt=None):
        shape, rate = K.sigma_params(state, ds, shape0, scale0, tt, Xt)
        return float(invgamma_draw(shape + 1.0, rate, rng))

    monkeypatch.setattr(K, "update_sigma", wrong)
    res = geweke_test("al", draws=5000, seed=1, adapt=500)
    assert abs(res.z[res.names.index("sigma")]) > 4
