"""Joint-distribution ("getting it right") checks of the samplers.

Two simulators target the joint prior of parameters, latents and data:

* marginal-conditional: parameters and latents from the prior, then data;
* successive-conditional: alternate data | state and one sampler sweep.

If every kernel leaves the posterior invariant, both produce the same
marginal distribution for any functional; the comparison uses a z statistic
whose successive-conditional variance is inflated by its inefficiency factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .diagnostics import inefficiency_factor
from .distributions import AEPParams, aep_sample, invgamma_draw
from .dp_mixture import stick_weights
from .model import CensoredDataset, ChainState, Family, ModelSpec, PriorConfig, theta_tau
from .samplers.chain import Sampler, chain_rng

FUNCTIONALS = {
    "al": ["beta0", "delta", "eta", "gamma0", "gamma_w", "sigma", "alpha", "phi", "sum_g", "n_pos"],
    "sn": ["beta0", "delta", "eta", "gamma0", "gamma_w", "sigma", "alpha", "phi", "sum_g", "n_pos"],
    "aep": ["beta0", "delta", "eta", "sigma", "gamma0", "gamma_w", "phi", "alpha", "zeta1", "zeta2"],
    "aldp": ["beta0", "delta", "eta", "gamma_w", "sigma", "alpha", "a", "n_clusters", "sum_g", "n_pos"],
    "sndp": ["beta0", "delta", "eta", "gamma_w", "sigma", "alpha", "a", "n_clusters", "sum_g", "n_pos"],
}


def tight_priors() -> PriorConfig:
    return PriorConfig(beta_cov=1.0, eta_var=1.0, gamma_cov=1.0, sigma_shape=3.0, sigma_scale=3.0,
                       phi_shape=3.0, phi_scale=3.0, base_shape=3.0, base_scale=3.0,
                       zeta_var=0.05)


def covariates(n: int, rng: np.random.Generator) -> CensoredDataset:
    """Fixed covariates; responses are placeholders overwritten by the simulators."""
    X = np.column_stack([np.ones(n), rng.standard_normal(n)])
    w = rng.standard_normal(n)
    return CensoredDataset.from_arrays(np.ones(n), X, np.zeros(n), w)


class JointSimulator:
    def __init__(self, family, p: float, base_ds: CensoredDataset, priors: PriorConfig):
        self.family = Family(family)
        if not self.family.endogenous:
            raise ValueError("joint simulator covers the endogenous families")
        self.spec = ModelSpec(p, self.family, priors)
        self.ds = base_ds
        self.sampler = Sampler(self.spec, base_ds)
        self.tt = theta_tau(p)

    # ------------------------------------------------------------ prior

    def draw_prior_state(self, rng: np.random.Generator) -> ChainState:
        fam, pr, n = self.family, self.spec.priors, self.ds.n
        bp, gp = self.sampler.beta_prior, self.sampler.gamma_prior
        beta = rng.multivariate_normal(bp.mean, np.linalg.inv(bp.prec))
        gamma = rng.multivariate_normal(gp.mean, np.linalg.inv(gp.prec))
        sigma = float(invgamma_draw(pr.sigma_shape, pr.sigma_scale, rng))
        g = rng.exponential(sigma, n)
        state = ChainState(beta_tilde=beta, sigma=sigma, g=g, ystar=np.zeros(n), gamma=gamma,
                           alpha=float(rng.uniform()))
        if fam.dp:
            state.a = float(rng.gamma(pr.a_shape, 1.0 / pr.a_rate))
            r = rng.random(n)
            omega = []
            total, remaining = 0.0, 1.0
            while total <= r.max():
                w = rng.beta(1.0, state.a)
                omega.append(w)
                total += w * remaining
                remaining *= 1.0 - w
            state.omega = np.array(omega)
            state.k_alloc = np.searchsorted(np.cumsum(stick_weights(state.omega)), r, side="right")
            state.k_alloc = np.minimum(state.k_alloc, len(omega) - 1).astype(np.intp)
            c0, d0 = pr.base(fam)
            state.phi_clusters = invgamma_draw(np.full(len(omega), c0), d0, rng)
        else:
            state.phi = float(invgamma_draw(pr.phi_shape, pr.phi_scale, rng))
        if fam is Family.AEP:
            lo = -pr.zeta_mean / math.sqrt(pr.zeta_var)
            state.zeta1, state.zeta2 = stats.truncnorm.rvs(
                lo, np.inf, loc=pr.zeta_mean, scale=math.sqrt(pr.zeta_var), size=2, random_state=rng)
        if fam.al_kernel:
            state.h = rng.exponential(state.first_stage_scales())
        return state

    # ------------------------------------------------------------ data | state

    def draw_data(self, state: ChainState, rng: np.random.Generator) -> CensoredDataset:
        """New (y, d) given the state; sets ``state.ystar`` consistently."""
        fam, ds, n = self.family, self.ds, self.ds.n
        scales = state.first_stage_scales() if fam is not Family.AEP else None
        if fam.al_kernel:
            tta = theta_tau(state.alpha)
            v = tta.theta * state.h + np.sqrt(tta.tau2 * scales * state.h) * rng.standard_normal(n)
        elif fam.sn_kernel:
            sq = np.sqrt(scales)
            z = np.abs(rng.standard_normal(n))
            left = rng.random(n) < state.alpha
            v = np.where(left, -sq / (2 * (1 - state.alpha)) * z, sq / (2 * state.alpha) * z)
        else:
            v = aep_sample(AEPParams(state.phi, state.alpha, state.zeta1, state.zeta2), rng, n)
        d = ds.Z @ state.gamma + v
        Xt = np.column_stack([ds.X, d, v])
        tt = self.tt
        ystar = Xt @ state.beta_tilde + tt.theta * state.g + np.sqrt(
            tt.tau2 * state.sigma * state.g) * rng.standard_normal(n)
        state.ystar = ystar
        return replace(ds, y=np.maximum(0.0, ystar), censored=ystar <= 0, d=d)

    # ------------------------------------------------------------ functionals

    def functionals(self, state: ChainState) -> np.ndarray:
        k = self.ds.k
        vals = {
            "beta0": state.beta_tilde[0], "delta": state.beta_tilde[k], "eta": state.beta_tilde[k + 1],
            "gamma0": state.gamma[0], "gamma_w": state.gamma[-1], "sigma": state.sigma,
            "alpha": state.alpha, "phi": state.phi, "zeta1": state.zeta1, "zeta2": state.zeta2,
            "a": state.a, "sum_g": state.g.sum(), "n_pos": float(np.sum(state.ystar > 0)),
            "n_clusters": None if state.k_alloc is None else float(len(np.unique(state.k_alloc))),
        }
        return np.array([vals[name] for name in FUNCTIONALS[self.family.value]], dtype=float)

    def marginal_conditional(self, draws: int, rng: np.random.Generator) -> np.ndarray:
        out = np.empty((draws, len(FUNCTIONALS[self.family.value])))
        for t in range(draws):
            state = self.draw_prior_state(rng)
            self.draw_data(state, rng)
            out[t] = self.functionals(state)
        return out

    def successive_conditional(self, draws: int, rng: np.random.Generator,
                               adapt: int = 2000) -> np.ndarray:
        """``adapt`` unrecorded sweeps tune the MH steps, which are then frozen."""
        sampler = self.sampler
        state = self.draw_prior_state(rng)
        out = np.empty((draws, len(FUNCTIONALS[self.family.value])))
        for t in range(adapt + draws):
            if t == adapt:
                sampler.freeze()
            sampler.ds = self.draw_data(state, rng)
            sampler.sweep(state, rng)
            if t >= adapt:
                out[t - adapt] = self.functionals(state)
        return out


@dataclass
class GewekeResult:
    family: str
    names: list
    z: np.ndarray
    mc_mean: np.ndarray
    sc_mean: np.ndarray
    sc_if: np.ndarray

    def passed(self, threshold: float = 4.0) -> bool:
        return bool(np.all(np.abs(self.z) < threshold))

    def table(self) -> str:
        rows = [f"{n:>10s} mc={m:10.4f} sc={s:10.4f} IF={f:7.1f} z={z:6.2f}"
                for n, m, s, f, z in zip(self.names, self.mc_mean, self.sc_mean, self.sc_if, self.z)]
        return "\n".join(rows)


def geweke_z(mc: np.ndarray, sc: np.ndarray):
    ifs = np.array([inefficiency_factor(sc[:, j]) if np.ptp(sc[:, j]) > 0 else 1.0
                    for j in range(sc.shape[1])])
    se2 = mc.var(axis=0, ddof=1) / len(mc) + sc.var(axis=0, ddof=1) * np.maximum(ifs, 1.0) / len(sc)
    return (mc.mean(axis=0) - sc.mean(axis=0)) / np.sqrt(se2), ifs


def geweke_test(family, draws: int = 100_000, n: int = 20, p: float = 0.5, seed: int = 0,
                priors: PriorConfig | None = None, adapt: int = 2000) -> GewekeResult:
    rng_cov = chain_rng(seed, 0)
    sim = JointSimulator(family, p, covariates(n, rng_cov), priors or tight_priors())
    mc = sim.marginal_conditional(draws, chain_rng(seed, 1))
    sc = sim.successive_conditional(draws, chain_rng(seed, 2), adapt=adapt)
    z, ifs = geweke_z(mc, sc)
    return GewekeResult(sim.family.value, FUNCTIONALS[sim.family.value], z, mc.mean(axis=0),
                        sc.mean(axis=0), ifs)
