"""Chain orchestration: initial states, family sweeps, retained draws.

Sweep orders (one iteration):

* tqr: y*, (beta, delta), sigma, g on the design (X, d).
* al: phi | h, gamma | h, alpha (h integrated out), h, second stage.
* sn: phi, gamma (MH), alpha (MH), second stage.
* aep: componentwise adaptive MH over (gamma, phi, alpha, zeta1, zeta2),
  second stage.
* aldp / sndp: sticks | labels (list cut after the largest occupied
  label), DP precision | sticks, slice variables, stick extension, labels
  (h integrated out), [aldp: h], cluster scales, gamma, alpha, [aldp: h],
  second stage.

The second stage is y*, beta_tilde, sigma, g on the design
(X, d, d - Z gamma).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .. import dp_mixture as dpm
from ..distributions import invgamma_draw
from ..model import (
    ChainState,
    CensoredDataset,
    Family,
    ModelSpec,
    design_matrix,
    ols,
    theta_tau,
    validate_dataset,
)
from . import kernels as K
from .mh import AcceptCounter, MHTuner


class SamplerError(RuntimeError):
    """A chain aborted; ``iteration`` is the zero-based failing sweep."""

    def __init__(self, message, iteration=None):
        super().__init__(message if iteration is None else f"iteration {iteration}: {message}")
        self.iteration = iteration


@dataclass(frozen=True)
class ChainConfig:
    iterations: int = 20000
    burn_in: int = 5000
    thin: int = 1
    seed: int = 0
    chains: int = 1

    def __post_init__(self):
        if self.iterations < 0 or self.burn_in < 0:
            raise ValueError("iterations and burn_in must be non-negative")
        if self.burn_in > self.iterations:
            raise ValueError("burn_in must not exceed iterations")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.chains < 1:
            raise ValueError("chains must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def kept(self) -> int:
        return len(range(self.burn_in, self.iterations, self.thin))


def param_names(family, k: int) -> list[str]:
    """Draws-file columns; depends only on the family and the number of regressors."""
    family = Family(family)
    names = [f"beta{j}" for j in range(k)] + ["delta"]
    if family is Family.TQR:
        return names + ["sigma"]
    names += ["eta"] + [f"gamma{j}" for j in range(k)] + ["gamma_w", "sigma", "alpha"]
    if family.dp:
        return names + ["a", "n_clusters"]
    names.append("phi")
    if family is Family.AEP:
        names += ["zeta1", "zeta2"]
    return names


def chain_rng(seed: int, chain_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chain_index,)))


@dataclass
class Chain:
    family: Family
    p: float
    names: list
    draws: np.ndarray
    acceptance: dict
    seed: int
    chain_index: int = 0
    latents: Optional[dict] = field(default=None, repr=False)

    def __getitem__(self, name) -> np.ndarray:
        return self.draws[:, self.names.index(name)]

    def __len__(self) -> int:
        return self.draws.shape[0]

    def means(self) -> dict:
        return dict(zip(self.names, self.draws.mean(axis=0))) if len(self) else {}


class Sampler:
    """One chain's kernels and tuners for a given model and dataset."""

    def __init__(self, spec: ModelSpec, ds: CensoredDataset):
        self.spec = spec
        self.family = fam = Family(spec.family)
        self.ds = ds
        self.tt = theta_tau(spec.p)
        pr = spec.priors
        k = ds.k
        dim = k + 2 if fam.endogenous else k + 1
        self.beta_prior = K.GaussianPrior.from_cov(*pr.beta_tilde_prior(dim, fam.endogenous))
        self.gamma_prior = K.GaussianPrior.from_cov(*pr.gamma_prior(k + 1)) if fam.endogenous else None
        self.base = pr.base(fam)
        self.alpha_tuner = MHTuner()
        self.gamma_counter = AcceptCounter()
        self.aep_tuners = {name: MHTuner() for name in K.aep_coordinate_names(k + 1)}
        if fam.endogenous and ds.w is None:
            raise ValueError(f"family {fam.value} needs an instrument column w")
        self.names = param_names(fam, k)
        self.check_coverage = False

    # ------------------------------------------------------------ state

    def init_state(self, rng: np.random.Generator, overdisperse: bool = False) -> ChainState:
        ds, fam = self.ds, self.family
        n = ds.n
        jitter = (lambda size, s: s * rng.standard_normal(size)) if overdisperse else (
            lambda size, s: np.zeros(size))
        ystar = np.where(ds.censored, -0.1, ds.y)
        gamma = None
        if fam.endogenous:
            gamma = ols(ds.Z, ds.d) + jitter(ds.k + 1, 0.25)
            Xt = design_matrix(ds, gamma)
        else:
            Xt = design_matrix(ds)
        beta = ols(Xt, ystar) + jitter(Xt.shape[1], 0.5)
        resid = ystar - Xt @ beta
        sigma = max(float(np.mean(np.abs(resid))), 0.05) * (math.exp(jitter(1, 0.5)[0]))
        state = ChainState(beta_tilde=beta, sigma=sigma, g=np.full(n, sigma), ystar=ystar, gamma=gamma)
        if not fam.endogenous:
            return state
        v = ds.d - ds.Z @ gamma
        scale = max(float(np.std(v)), 0.05) * math.exp(jitter(1, 0.3)[0])
        state.alpha = 0.5
        if fam.dp:
            state.k_alloc = np.zeros(n, dtype=np.intp)
            state.omega = np.array([0.5])
            state.phi_clusters = np.array([scale])
            state.a = 1.0
        else:
            state.phi = scale
        if fam is Family.AEP:
            state.zeta1 = state.zeta2 = 1.0
        if fam.al_kernel:
            state.h = state.first_stage_scales().copy()
        return state

    # ------------------------------------------------------------ sweeps

    def sweep(self, state: ChainState, rng: np.random.Generator) -> None:
        fam = self.family
        if fam is Family.TQR:
            self._second_stage(state, rng, design_matrix(self.ds))
            return
        if fam.dp:
            self._dp_first_stage(state, rng)
        elif fam is Family.AL:
            self._al_first_stage(state, rng)
        elif fam is Family.SN:
            self._sn_first_stage(state, rng)
        else:
            K.update_aep_block(state, self.ds, self.spec.priors, self.gamma_prior, self.tt,
                               self.aep_tuners, rng)
        self._second_stage(state, rng, design_matrix(self.ds, state.gamma))

    def _second_stage(self, state, rng, Xt):
        ds, tt, pr = self.ds, self.tt, self.spec.priors
        state.ystar = K.update_ystar(state, ds, tt, rng, Xt)
        state.beta_tilde = K.update_beta_tilde(state, ds, self.beta_prior, tt, rng, Xt)
        state.sigma = K.update_sigma(state, ds, pr.sigma_shape, pr.sigma_scale, tt, rng, Xt)
        state.g = K.update_g(state, ds, tt, rng, Xt)

    def _update_gamma(self, state, rng):
        if self.family.al_kernel:
            state.gamma = K.update_gamma_gibbs(state, self.ds, self.gamma_prior, self.tt, rng)
        else:
            state.gamma, ok = K.update_gamma_mh_sn(state, self.ds, self.gamma_prior, self.tt, rng)
            self.gamma_counter.record(ok)

    def _update_alpha(self, state, rng):
        state.alpha, _ = K.update_alpha_mh(state, self.ds, self.family.value, self.alpha_tuner, rng)

    def _update_h(self, state, rng):
        state.h = K.update_h_aldp(state, self.ds, theta_tau(state.alpha), rng)

    def _al_first_stage(self, state, rng):
        pr = self.spec.priors
        shape, rate = K.phi_params_al(state, self.ds, pr.phi_shape, pr.phi_scale)
        state.phi = float(invgamma_draw(shape, rate, rng))
        self._update_gamma(state, rng)
        self._update_alpha(state, rng)
        self._update_h(state, rng)

    def _sn_first_stage(self, state, rng):
        pr = self.spec.priors
        shape, rate = K.phi_params_sn(state, self.ds, pr.phi_shape, pr.phi_scale)
        state.phi = float(invgamma_draw(shape, rate, rng))
        self._update_gamma(state, rng)
        self._update_alpha(state, rng)

    def _dp_first_stage(self, state, rng):
        fam, ds = self.family, self.ds
        L = int(state.k_alloc.max()) + 1
        omega = dpm.update_sticks(state.k_alloc, state.a, L, rng)
        phis = state.phi_clusters[:L]
        pr = self.spec.priors
        state.a = dpm.update_precision_sticks(omega, (pr.a_shape, pr.a_rate), rng)
        state.u = dpm.update_slice_u(state.k_alloc, dpm.stick_weights(omega), rng)
        st = dpm.extend_sticks(dpm.StickState(omega, phis, L), float(state.u.min()), state.a,
                               self.base, rng)
        if self.check_coverage and not dpm.coverage_ok(st, state.u):
            raise dpm.NumericalDegeneracyError("stick coverage invariant violated")
        state.omega, state.phi_clusters = st.omega, st.phi_clusters
        v = K.first_stage_residual(state, ds)
        state.k_alloc = dpm.update_alloc(v, st, state.u, state.alpha, fam.value, rng)
        size = len(state.omega)
        if fam is Family.ALDP:
            self._update_h(state, rng)
            state.phi_clusters = dpm.update_cluster_scales_aldp(
                v, state.h, state.k_alloc, state.alpha, self.base, rng, size)
        else:
            state.phi_clusters = dpm.update_cluster_scales_sndp(
                v, state.k_alloc, state.alpha, self.base, rng, size)
        self._update_gamma(state, rng)
        self._update_alpha(state, rng)
        if fam is Family.ALDP:
            self._update_h(state, rng)

    # ------------------------------------------------------------ output

    def record(self, state: ChainState) -> np.ndarray:
        fam = self.family
        vals = list(state.beta_tilde)
        if fam is Family.TQR:
            return np.array(vals + [state.sigma])
        vals += list(state.gamma) + [state.sigma, state.alpha]
        if fam.dp:
            vals += [state.a, float(len(np.unique(state.k_alloc)))]
        else:
            vals.append(state.phi)
            if fam is Family.AEP:
                vals += [state.zeta1, state.zeta2]
        return np.array(vals)

    def tuners(self) -> dict:
        fam = self.family
        if fam is Family.AEP:
            return dict(self.aep_tuners)
        if fam.endogenous:
            return {"alpha": self.alpha_tuner}
        return {}

    def freeze(self) -> None:
        for t in self.tuners().values():
            t.freeze()
            t.reset_counts()
        self.gamma_counter.reset_counts()

    def acceptance(self) -> dict:
        out = {name: t.rate for name, t in self.tuners().items()}
        if self.family.sn_kernel:
            out["gamma"] = self.gamma_counter.rate
        return out


def run_chain(spec: ModelSpec, ds: CensoredDataset, cfg: ChainConfig, chain_index: int = 0,
              save_latents: bool = False) -> Chain:
    """Run one chain; chains after the first start from overdispersed values."""
    errors = validate_dataset(ds)
    if errors:
        raise ValueError("; ".join(errors))
    sampler = Sampler(spec, ds)
    rng = chain_rng(cfg.seed, chain_index)
    state = sampler.init_state(rng, overdisperse=chain_index > 0)
    kept = np.empty((cfg.kept, len(sampler.names)))
    latents = {"g": [], "ystar": [], "h": [], "k_alloc": []} if save_latents else None
    row = 0
    if cfg.burn_in == 0:
        sampler.freeze()
    for it in range(cfg.iterations):
        if it == cfg.burn_in and it > 0:
            sampler.freeze()
        try:
            with np.errstate(divide="raise", invalid="raise", over="raise"):
                sampler.sweep(state, rng)
        except (dpm.NumericalDegeneracyError, FloatingPointError, np.linalg.LinAlgError) as exc:
            raise SamplerError(str(exc), it) from exc
        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
            vals = sampler.record(state)
            if not np.all(np.isfinite(vals)):
                raise SamplerError("non-finite parameter draw", it)
            kept[row] = vals
            row += 1
            if save_latents:
                latents["g"].append(state.g.copy())
                latents["ystar"].append(state.ystar.copy())
                if state.h is not None:
                    latents["h"].append(state.h.copy())
                if state.k_alloc is not None:
                    latents["k_alloc"].append(state.k_alloc.copy())
    if save_latents:
        latents = {k: np.array(v) for k, v in latents.items() if v}
    return Chain(family=sampler.family, p=spec.p, names=sampler.names, draws=kept,
                 acceptance=sampler.acceptance(), seed=cfg.seed, chain_index=chain_index,
                 latents=latents)


def run_tqr(spec: ModelSpec, ds: CensoredDataset, cfg: ChainConfig, chain_index: int = 0) -> Chain:
    """Standard Bayesian Tobit quantile regression (no first stage)."""
    return run_chain(replace(spec, family=Family.TQR), ds, cfg, chain_index)


def _run_one(args):
    return run_chain(*args)


def run_chains(spec: ModelSpec, ds: CensoredDataset, cfg: ChainConfig, workers: Optional[int] = None,
               save_latents: bool = False) -> list[Chain]:
    """Run ``cfg.chains`` independent chains, in worker processes when ``workers > 1``."""
    jobs = [(spec, ds, cfg, c, save_latents) for c in range(cfg.chains)]
    workers = 1 if workers is None else min(workers, cfg.chains, os.cpu_count() or 1)
    if workers <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_run_one, jobs))
