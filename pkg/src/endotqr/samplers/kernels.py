"""Full-conditional update kernels for both regression stages.

Second stage (all families): latent responses ``ystar``, coefficient block
``beta_tilde = (beta', delta, eta)'``, AL scale ``sigma`` and exponential
mixing variables ``g``. First stage: ``gamma``, ``alpha``, scale(s) and, for
the AL-based families, mixing variables ``h``.

Each conjugate kernel has a companion ``*_posterior``/``*_params`` function
returning the exact moments it samples from, so tests can check them
against independent dense computations.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Optional

import numpy as np
from scipy import linalg

from ..distributions import (
    aep_logdens,
    al_logdens,
    gig_half,
    invgamma_draw,
    sn_logdens,
    tn_sample,
)
from ..dp_mixture import NumericalDegeneracyError
from ..model import ChainState, CensoredDataset, ThetaTau, design_matrix, theta_tau
from .mh import MHTuner

FLOOR = 1e-12


class GaussianPrior(NamedTuple):
    mean: np.ndarray
    prec: np.ndarray

    @classmethod
    def from_cov(cls, mean, cov):
        return cls(np.asarray(mean, float), np.linalg.inv(np.asarray(cov, float)))

    def logpdf(self, x) -> float:
        r = x - self.mean
        return -0.5 * float(r @ self.prec @ r)


def mvn_from_precision(prec, rhs, rng: np.random.Generator):
    """Draw from N(prec^{-1} rhs, prec^{-1})."""
    try:
        L = np.linalg.cholesky(prec)
    except np.linalg.LinAlgError:
        raise NumericalDegeneracyError("posterior precision is not positive definite") from None
    mean = linalg.cho_solve((L, True), rhs, check_finite=False)
    z = rng.standard_normal(len(rhs))
    return mean + linalg.solve_triangular(L.T, z, lower=False, check_finite=False)


def _floor(x):
    return np.maximum(x, FLOOR)


def second_stage_design(state: ChainState, ds: CensoredDataset) -> np.ndarray:
    return design_matrix(ds, state.gamma)


# ---------------------------------------------------------------- second stage


def ystar_params(state: ChainState, ds: CensoredDataset, tt: ThetaTau, Xt=None):
    """Mean and variance of the untruncated normal for each latent response."""
    Xt = second_stage_design(state, ds) if Xt is None else Xt
    return Xt @ state.beta_tilde + tt.theta * state.g, tt.tau2 * state.sigma * state.g


def update_ystar(state, ds, tt, rng, Xt=None):
    ystar = ds.y.astype(float).copy()
    cens = ds.censored
    if np.any(cens):
        mean, var = ystar_params(state, ds, tt, Xt)
        ystar[cens] = tn_sample(mean[cens], var[cens], -np.inf, 0.0, rng)
    return ystar


def beta_tilde_posterior(state, ds, prior: GaussianPrior, tt, Xt=None):
    """Posterior precision and linear term (B1^{-1}, B1^{-1} b1) of beta_tilde."""
    Xt = second_stage_design(state, ds) if Xt is None else Xt
    wts = 1.0 / (tt.tau2 * state.sigma * state.g)
    prec = (Xt * wts[:, None]).T @ Xt + prior.prec
    rhs = Xt.T @ (wts * (state.ystar - tt.theta * state.g)) + prior.prec @ prior.mean
    return prec, rhs


def update_beta_tilde(state, ds, prior, tt, rng, Xt=None):
    prec, rhs = beta_tilde_posterior(state, ds, prior, tt, Xt)
    return mvn_from_precision(prec, rhs, rng)


def sigma_params(state, ds, shape0, scale0, tt, Xt=None):
    Xt = second_stage_design(state, ds) if Xt is None else Xt
    n = len(state.ystar)
    r = state.ystar - Xt @ state.beta_tilde - tt.theta * state.g
    return 1.5 * n + shape0, float(state.g.sum() + (r * r / (2.0 * tt.tau2 * state.g)).sum() + scale0)


def update_sigma(state, ds, shape0, scale0, tt, rng, Xt=None):
    shape, rate = sigma_params(state, ds, shape0, scale0, tt, Xt)
    return float(invgamma_draw(shape, rate, rng))


def g_params(state, ds, tt, Xt=None):
    """GIG(1/2, lambda_i, psi) parameters of the second-stage mixing variables."""
    Xt = second_stage_design(state, ds) if Xt is None else Xt
    r = state.ystar - Xt @ state.beta_tilde
    lam = np.abs(r) / math.sqrt(tt.tau2 * state.sigma)
    psi = math.sqrt(tt.theta**2 / (tt.tau2 * state.sigma) + 2.0 / state.sigma)
    return lam, psi


def update_g(state, ds, tt, rng, Xt=None):
    lam, psi = g_params(state, ds, tt, Xt)
    return _floor(gig_half(lam, psi, rng))


# ---------------------------------------------------------------- first stage


def first_stage_residual(state, ds, gamma=None):
    return ds.d - ds.Z @ (state.gamma if gamma is None else gamma)


def h_params(state, ds, tt_alpha: ThetaTau):
    v = first_stage_residual(state, ds)
    phi = state.first_stage_scales()
    xi = np.abs(v) / np.sqrt(tt_alpha.tau2 * phi)
    chi = np.sqrt(tt_alpha.theta**2 / (tt_alpha.tau2 * phi) + 2.0 / phi)
    return xi, chi


def update_h_aldp(state, ds, tt_alpha, rng):
    xi, chi = h_params(state, ds, tt_alpha)
    return _floor(gig_half(xi, chi, rng))


def _second_stage_offset(state, ds, tt):
    """m_i with second-stage residual m_i + eta * z_i' gamma (gamma-free part)."""
    k = ds.k
    beta, delta, eta = state.beta_tilde[:k], state.beta_tilde[k], state.beta_tilde[k + 1]
    return state.ystar - ds.X @ beta - (delta + eta) * ds.d - tt.theta * state.g, eta


def gamma_posterior_al(state, ds, prior: GaussianPrior, tt):
    """Precision and linear term of gamma given h (AL and ALDP first stages)."""
    Z = ds.Z
    m, eta = _second_stage_offset(state, ds, tt)
    w2 = 1.0 / (tt.tau2 * state.sigma * state.g)
    tta = theta_tau(state.alpha)
    w1 = 1.0 / (tta.tau2 * state.first_stage_scales() * state.h)
    prec = (Z * (eta * eta * w2 + w1)[:, None]).T @ Z + prior.prec
    rhs = Z.T @ (-eta * m * w2 + (ds.d - tta.theta * state.h) * w1) + prior.prec @ prior.mean
    return prec, rhs


def update_gamma_gibbs(state, ds, prior, tt, rng):
    prec, rhs = gamma_posterior_al(state, ds, prior, tt)
    return mvn_from_precision(prec, rhs, rng)


def second_stage_loglik_gamma(gamma, state, ds, tt, offset=None):
    """Gamma-dependent second-stage normal log density (up to a constant)."""
    m, eta = _second_stage_offset(state, ds, tt) if offset is None else offset
    r = m + eta * (ds.Z @ gamma)
    return -float((r * r / (2.0 * tt.tau2 * state.sigma * state.g)).sum())


def gamma_proposal_sn(gamma, state, ds, prior: GaussianPrior, tt, offset=None):
    """Precision and linear term of the SN gamma proposal at ``gamma``."""
    Z = ds.Z
    m, eta = _second_stage_offset(state, ds, tt) if offset is None else offset
    w2 = 1.0 / (tt.tau2 * state.sigma * state.g)
    ind = ds.d <= Z @ gamma
    w1 = 4.0 * (state.alpha - ind) ** 2 / state.first_stage_scales()
    prec = (Z * (eta * eta * w2 + w1)[:, None]).T @ Z + prior.prec
    rhs = Z.T @ (-eta * m * w2 + ds.d * w1) + prior.prec @ prior.mean
    return prec, rhs


def _mvn_logpdf_prec(x, prec, rhs):
    L = np.linalg.cholesky(prec)
    mean = linalg.cho_solve((L, True), rhs, check_finite=False)
    r = L.T @ (x - mean)
    return float(np.log(np.diag(L)).sum() - 0.5 * r @ r - 0.5 * len(x) * math.log(2 * math.pi))


def gamma_target_sn(gamma, state, ds, prior, tt, offset=None):
    v = ds.d - ds.Z @ gamma
    return (
        second_stage_loglik_gamma(gamma, state, ds, tt, offset)
        + float(sn_logdens(v, state.first_stage_scales(), state.alpha).sum())
        + prior.logpdf(gamma)
    )


def gamma_mh_sn_log_ratio(gamma, gamma_prop, state, ds, prior, tt, offset=None):
    """log of pi(g')q(g|g') / (pi(g)q(g'|g)) for the SN gamma kernel."""
    offset = _second_stage_offset(state, ds, tt) if offset is None else offset
    fwd = gamma_proposal_sn(gamma, state, ds, prior, tt, offset)
    rev = gamma_proposal_sn(gamma_prop, state, ds, prior, tt, offset)
    return (
        gamma_target_sn(gamma_prop, state, ds, prior, tt, offset)
        - gamma_target_sn(gamma, state, ds, prior, tt, offset)
        + _mvn_logpdf_prec(gamma, *rev)
        - _mvn_logpdf_prec(gamma_prop, *fwd)
    )


def update_gamma_mh_sn(state, ds, prior, tt, rng):
    """Metropolis-Hastings with the state-dependent normal proposal N(g1(gamma), G1(gamma))."""
    offset = _second_stage_offset(state, ds, tt)
    prec, rhs = gamma_proposal_sn(state.gamma, state, ds, prior, tt, offset)
    prop = mvn_from_precision(prec, rhs, rng)
    log_r = gamma_mh_sn_log_ratio(state.gamma, prop, state, ds, prior, tt, offset)
    if math.log(rng.random()) < log_r:
        return prop, True
    return state.gamma, False


def first_stage_loglik(family: str, v, state: ChainState, alpha=None, zeta1=None, zeta2=None,
                       phi=None) -> float:
    """Exact first-stage log likelihood (mixing variables integrated out)."""
    alpha = state.alpha if alpha is None else alpha
    if family == "aep":
        return float(aep_logdens(
            v, state.phi if phi is None else phi, alpha,
            state.zeta1 if zeta1 is None else zeta1,
            state.zeta2 if zeta2 is None else zeta2,
        ).sum())
    scales = state.first_stage_scales() if phi is None else phi
    if family in ("al", "aldp"):
        return float(al_logdens(v, scales, alpha).sum())
    if family in ("sn", "sndp"):
        return float(sn_logdens(v, scales, alpha).sum())
    raise ValueError(f"unknown family {family!r}")


def _logit(x):
    return math.log(x / (1.0 - x))


def _expit(x):
    return 1.0 / (1.0 + math.exp(-x)) if x >= 0 else math.exp(x) / (1.0 + math.exp(x))


def alpha_log_ratio(family, v, state, alpha_new) -> float:
    """MH log ratio for a logit-scale move of alpha (uniform prior, Jacobian included)."""
    a = state.alpha
    return (
        first_stage_loglik(family, v, state, alpha=alpha_new)
        - first_stage_loglik(family, v, state)
        + math.log(alpha_new * (1.0 - alpha_new))
        - math.log(a * (1.0 - a))
    )


_ALPHA_EDGE = 1e-8


def update_alpha_mh(state, ds, family: str, tuner: MHTuner, rng, v=None):
    v = first_stage_residual(state, ds) if v is None else v
    z = _logit(state.alpha) + tuner.step * rng.standard_normal()
    prop = _expit(z)
    if not (_ALPHA_EDGE < prop < 1.0 - _ALPHA_EDGE):
        tuner.record(False)
        return state.alpha, False
    ok = math.log(rng.random()) < alpha_log_ratio(family, v, state, prop)
    tuner.record(ok)
    return (prop, True) if ok else (state.alpha, False)


def phi_params_al(state, ds, shape0, scale0):
    """IG posterior of the parametric AL first-stage scale given h."""
    v = first_stage_residual(state, ds)
    tta = theta_tau(state.alpha)
    h = state.h
    return 1.5 * len(v) + shape0, float((h + (v - tta.theta * h) ** 2 / (2 * tta.tau2 * h)).sum() + scale0)


def phi_params_sn(state, ds, shape0, scale0):
    v = first_stage_residual(state, ds)
    wt = state.alpha - (v <= 0)
    return 0.5 * len(v) + shape0, float((2.0 * v * v * wt * wt).sum() + scale0)


# ---------------------------------------------------------------- AEP


def _tn_pos_logprior(x, mean, var):
    return -0.5 * (x - mean) ** 2 / var


def aep_coordinate_names(q: int) -> list[str]:
    return [f"gamma{j}" for j in range(q)] + ["phi", "alpha", "zeta1", "zeta2"]


def update_aep_block(state, ds, priors, gamma_prior: GaussianPrior, tt, tuners: dict, rng):
    """Componentwise adaptive random-walk MH over the AEP first stage.

    gamma coordinates move on their natural scale, phi and the zetas on the
    log scale, alpha on the logit scale. A tail shape without an entry in
    ``tuners`` is held fixed. Mutates ``state``; returns a dict of
    per-coordinate acceptance flags.
    """
    Z, d = ds.Z, ds.d
    offset = _second_stage_offset(state, ds, tt)
    accepted = {}

    v = d - Z @ state.gamma
    ll1 = first_stage_loglik("aep", v, state)
    ll2 = second_stage_loglik_gamma(state.gamma, state, ds, tt, offset)
    lp = gamma_prior.logpdf(state.gamma)
    for j in range(len(state.gamma)):
        t = tuners[f"gamma{j}"]
        prop = state.gamma.copy()
        prop[j] += t.step * rng.standard_normal()
        v_new = d - Z @ prop
        ll1_new = first_stage_loglik("aep", v_new, state)
        ll2_new = second_stage_loglik_gamma(prop, state, ds, tt, offset)
        lp_new = gamma_prior.logpdf(prop)
        ok = math.log(rng.random()) < (ll1_new + ll2_new + lp_new) - (ll1 + ll2 + lp)
        t.record(ok)
        accepted[f"gamma{j}"] = ok
        if ok:
            state.gamma, v, ll1, ll2, lp = prop, v_new, ll1_new, ll2_new, lp_new

    # phi, log scale with IG prior
    a0, b0 = priors.phi_shape, priors.phi_scale
    t = tuners["phi"]
    new = state.phi * math.exp(t.step * rng.standard_normal())
    ll1_new = first_stage_loglik("aep", v, state, phi=new)
    log_r = (ll1_new - ll1
             - a0 * (math.log(new) - math.log(state.phi)) - b0 / new + b0 / state.phi)
    ok = math.log(rng.random()) < log_r
    t.record(ok)
    accepted["phi"] = ok
    if ok:
        state.phi, ll1 = new, ll1_new

    # alpha, logit scale with uniform prior
    t = tuners["alpha"]
    new = _expit(_logit(state.alpha) + t.step * rng.standard_normal())
    ok = False
    if _ALPHA_EDGE < new < 1.0 - _ALPHA_EDGE:
        ll1_new = first_stage_loglik("aep", v, state, alpha=new)
        log_r = ll1_new - ll1 + math.log(new * (1 - new)) - math.log(state.alpha * (1 - state.alpha))
        ok = math.log(rng.random()) < log_r
        if ok:
            state.alpha, ll1 = new, ll1_new
    t.record(ok)
    accepted["alpha"] = ok

    # tail shapes, log scale with N(mean, var) prior truncated to (0, inf)
    for name in ("zeta1", "zeta2"):
        if name not in tuners:
            continue
        t = tuners[name]
        cur = getattr(state, name)
        new = cur * math.exp(t.step * rng.standard_normal())
        ll1_new = first_stage_loglik("aep", v, state, **{name: new})
        log_r = (ll1_new - ll1
                 + _tn_pos_logprior(new, priors.zeta_mean, priors.zeta_var)
                 - _tn_pos_logprior(cur, priors.zeta_mean, priors.zeta_var)
                 + math.log(new) - math.log(cur))
        ok = math.log(rng.random()) < log_r
        t.record(ok)
        accepted[name] = ok
        if ok:
            setattr(state, name, new)
            ll1 = ll1_new
    return accepted


def aep_log_target(state, ds, priors, gamma_prior, tt) -> float:
    """Joint log target of the AEP first-stage block (for tests)."""
    v = first_stage_residual(state, ds)
    return (
        first_stage_loglik("aep", v, state)
        + second_stage_loglik_gamma(state.gamma, state, ds, tt)
        + gamma_prior.logpdf(state.gamma)
        - (priors.phi_shape + 1) * math.log(state.phi) - priors.phi_scale / state.phi
        + _tn_pos_logprior(state.zeta1, priors.zeta_mean, priors.zeta_var)
        + _tn_pos_logprior(state.zeta2, priors.zeta_mean, priors.zeta_var)
    )
