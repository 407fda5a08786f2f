import math

import numpy as np
import pytest

from endotqr.diagnostics import inefficiency_factor, summarize
from endotqr.distributions import aep_logdens, al_logdens
from endotqr.model import CensoredDataset, Family, ModelSpec
from endotqr.samplers import kernels as K
from endotqr.samplers.chain import (
    ChainConfig, Sampler, SamplerError, chain_rng, param_names, run_chain, run_chains, run_tqr,
)
from endotqr.simstudy import gen_motivating, gen_setting

FAMILIES = ["tqr", "al", "sn", "aep", "aldp", "sndp"]


@pytest.fixture(scope="module")
def s1():
    return gen_setting(1, 300, chain_rng(101, 0))[0]


@pytest.fixture(scope="module")
def small():
    return gen_setting(1, 60, chain_rng(102, 0))[0]


def test_chain_config_validation():
    with pytest.raises(ValueError):
        ChainConfig(iterations=10, burn_in=11)
    with pytest.raises(ValueError):
        ChainConfig(thin=0)
    with pytest.raises(ValueError):
        ChainConfig(seed=2**64)
    assert ChainConfig(iterations=100, burn_in=10, thin=3).kept == 30


def test_param_names_schema():
    assert param_names("tqr", 2) == ["beta0", "beta1", "delta", "sigma"]
    assert param_names("al", 2) == ["beta0", "beta1", "delta", "eta", "gamma0", "gamma1", "gamma_w",
                                    "sigma", "alpha", "phi"]
    assert param_names("aep", 1)[-3:] == ["phi", "zeta1", "zeta2"]
    assert param_names("sndp", 1)[-2:] == ["a", "n_clusters"]


@pytest.mark.parametrize("family", FAMILIES)
def test_every_family_runs_and_is_deterministic(family, small):
    cfg = ChainConfig(iterations=300, burn_in=100, thin=2, seed=11)
    a = run_chain(ModelSpec(0.3, Family(family)), small, cfg)
    b = run_chain(ModelSpec(0.3, Family(family)), small, cfg)
    assert a.draws.shape == (100, len(param_names(family, 2)))
    assert np.all(np.isfinite(a.draws))
    np.testing.assert_array_equal(a.draws, b.draws)
    c = run_chain(ModelSpec(0.3, Family(family)), small, cfg, chain_index=1)
    assert not np.array_equal(a.draws, c.draws)
    if Family(family).endogenous:
        assert np.all((a["alpha"] > 0) & (a["alpha"] < 1))
        assert all(0.0 <= r <= 1.0 for r in a.acceptance.values())


def test_empty_retained_sample(small):
    ch = run_chain(ModelSpec(0.5, Family.AL), small, ChainConfig(iterations=50, burn_in=50, seed=1))
    assert len(ch) == 0 and ch.draws.shape == (0, len(ch.names))
    assert ch.seed == 1 and ch.means() == {}


def test_run_chains_parallel_matches_sequential(small):
    cfg = ChainConfig(iterations=200, burn_in=50, seed=5, chains=2)
    spec = ModelSpec(0.5, Family.SNDP)
    seq = run_chains(spec, small, cfg)
    par = run_chains(spec, small, cfg, workers=2)
    for a, b in zip(seq, par):
        np.testing.assert_array_equal(a.draws, b.draws)
    assert not np.array_equal(seq[0].draws, seq[1].draws)


def test_tuners_frozen_after_burn_in(small):
    sampler = Sampler(ModelSpec(0.5, Family.AEP), small)
    r = chain_rng(3, 0)
    state = sampler.init_state(r)
    for _ in range(300):
        sampler.sweep(state, r)
    sampler.freeze()
    steps = {k: t.step for k, t in sampler.tuners().items()}
    for _ in range(300):
        sampler.sweep(state, r)
    assert steps == {k: t.step for k, t in sampler.tuners().items()}
    assert all(t.proposed == 300 for t in sampler.tuners().values())


def test_sampler_error_carries_iteration(small, monkeypatch):
    from endotqr.dp_mixture import NumericalDegeneracyError
    calls = {"n": 0}
    real = K.update_sigma

    def flaky(*args, **kw):
        calls["n"] += 1
        if calls["n"] == 4:
            raise NumericalDegeneracyError("synthetic")
        return real(*args, **kw)

    monkeypatch.setattr(K, "update_sigma", flaky)
    with pytest.raises(SamplerError) as info:
        run_chain(ModelSpec(0.5, Family.AL), small, ChainConfig(iterations=10, burn_in=2))
    assert info.value.iteration == 3


def test_endogenous_fit_needs_instrument(small):
    ds = CensoredDataset.from_arrays(small.y, small.X, small.d)
    with pytest.raises(ValueError, match="instrument"):
        run_chain(ModelSpec(0.5, Family.AL), ds, ChainConfig(iterations=10, burn_in=2))
    ch = run_chain(ModelSpec(0.5, Family.TQR), ds, ChainConfig(iterations=10, burn_in=2))
    assert ch.names == ["beta0", "beta1", "delta", "sigma"]


def test_invalid_dataset_rejected(small):
    y = small.y.copy()
    y[0] = -1.0
    bad = CensoredDataset(y, small.censored, small.X, small.d, small.w)
    with pytest.raises(ValueError, match="negative"):
        run_chain(ModelSpec(0.5, Family.AL), bad, ChainConfig(iterations=10, burn_in=2))


@pytest.mark.parametrize("family", ["aldp", "sndp"])
def test_dp_stick_coverage_holds_every_sweep(family, small):
    sampler = Sampler(ModelSpec(0.5, Family(family)), small)
    sampler.check_coverage = True
    r = chain_rng(4, 0)
    state = sampler.init_state(r)
    for _ in range(500):
        sampler.sweep(state, r)
        assert state.k_alloc.max() < len(state.omega)
        pi = np.cumsum(state.omega * np.concatenate([[1.0], np.cumprod(1 - state.omega)[:-1]]))
        assert np.all(state.u < pi[-1])


def test_save_latents(small):
    ch = run_chain(ModelSpec(0.5, Family.ALDP), small, ChainConfig(iterations=30, burn_in=10, thin=5),
                   save_latents=True)
    assert ch.latents["g"].shape == (4, small.n)
    assert ch.latents["k_alloc"].shape == (4, small.n)
    assert np.all(ch.latents["ystar"][:, ~small.censored] == small.y[~small.censored])


def test_aep_acceptance_rates_after_adaptation(s1):
    ch = run_chain(ModelSpec(0.5, Family.AEP), s1, ChainConfig(iterations=4000, burn_in=2000, seed=3))
    assert set(ch.acceptance) == set(K.aep_coordinate_names(3))
    for name, rate in ch.acceptance.items():
        assert 0.2 <= rate <= 0.6, (name, rate)


def test_aep_with_unit_shapes_matches_al_predictive(s1):
    """AEP with zeta1 = zeta2 = 1 is AL with scale alpha (1 - alpha) phi."""
    pts = np.array([-2.0, -0.7, 0.0, 0.5, 1.8])
    al = run_chain(ModelSpec(0.5, Family.AL), s1, ChainConfig(iterations=20000, burn_in=5000, seed=1))
    f_al = np.exp(al_logdens(pts[None, :], al["phi"][:, None], al["alpha"][:, None]))
    sampler = Sampler(ModelSpec(0.5, Family.AEP), s1)
    del sampler.aep_tuners["zeta1"], sampler.aep_tuners["zeta2"]
    r = chain_rng(2, 0)
    state = sampler.init_state(r)
    kept = []
    for it in range(20000):
        if it == 5000:
            sampler.freeze()
        sampler.sweep(state, r)
        if it >= 5000:
            kept.append((state.phi, state.alpha))
    assert state.zeta1 == state.zeta2 == 1.0
    kept = np.array(kept)
    f_aep = np.exp(aep_logdens(pts[None, :], kept[:, :1], kept[:, 1:], 1.0, 1.0))
    for j in range(len(pts)):
        se = math.sqrt(sum(f[:, j].var() * max(inefficiency_factor(f[:, j]), 1.0) / len(f) for f in (f_al, f_aep)))
        assert abs(f_al[:, j].mean() - f_aep[:, j].mean()) < 4 * se


def test_setting1_al_recovers_delta(s1):
    ch = run_chain(ModelSpec(0.5, Family.AL), s1, ChainConfig(iterations=20000, burn_in=5000, seed=1))
    assert abs(ch["delta"].mean() - 1.0) < 0.05


def test_tqr_on_motivating_data():
    exo, _ = gen_motivating(0.0, 300, chain_rng(103, 0))
    cfg = ChainConfig(iterations=6000, burn_in=1500, seed=2)
    ch = run_tqr(ModelSpec(0.5, Family.AL), exo, cfg)
    rep = summarize(ch)
    for name in ("beta0", "beta1", "delta"):
        assert rep[name].lower < 1.0 < rep[name].upper
    again = run_tqr(ModelSpec(0.5, Family.AL), exo, cfg)
    np.testing.assert_array_equal(ch.draws, again.draws)
    endo, _ = gen_motivating(0.6, 300, chain_rng(104, 0))
    assert abs(run_tqr(ModelSpec(0.5, Family.AL), endo, cfg)["delta"].mean() - 1.0) > 0.1
