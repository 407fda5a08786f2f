"""Dirichlet-process scale mixtures: slice variables and stick-breaking.

Shared by the ALDP and SNDP first stages. The infinite mixture is handled
with slice variables ``u_i`` and a retrospectively extended list of sticks:
only clusters ``l <= k*`` can be selected, where ``k*`` is the smallest
index with ``sum_{l<=k*} pi_l > 1 - min(u)``. Cluster labels are zero-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import al_logdens, invgamma_draw, sn_logdens
from .model import theta_tau

MAX_STICKS = 10**6


class NumericalDegeneracyError(RuntimeError):
    """A kernel hit a numerically degenerate configuration."""

    def __init__(self, message, iteration=None):
        super().__init__(message if iteration is None else f"iteration {iteration}: {message}")
        self.iteration = iteration


@dataclass
class StickState:
    omega: np.ndarray
    phi_clusters: np.ndarray
    k_star: int

    def __post_init__(self):
        if len(self.omega) != len(self.phi_clusters):
            raise ValueError("omega and phi_clusters must have equal length")
        if not 1 <= self.k_star <= len(self.omega):
            raise ValueError("k_star out of range")


def stick_weights(omega) -> np.ndarray:
    """pi_l = omega_l * prod_{r<l} (1 - omega_r)."""
    omega = np.asarray(omega, dtype=float)
    rest = np.concatenate([[1.0], np.cumprod(1.0 - omega)[:-1]])
    return omega * rest


def cluster_counts(k_alloc, size: int) -> np.ndarray:
    return np.bincount(k_alloc, minlength=size)[:size]


def update_slice_u(k_alloc, pi, rng: np.random.Generator) -> np.ndarray:
    """u_i ~ U(0, pi_{k_i})."""
    w = np.asarray(pi)[k_alloc]
    if np.any(w <= 0):
        raise NumericalDegeneracyError("zero stick weight at an allocated cluster")
    return w * rng.random(len(k_alloc))


def stick_beta_params(k_alloc, a: float, k_star: int):
    """Beta(1 + n_l, n - sum_{r<=l} n_r + a) parameters for l < k_star."""
    counts = cluster_counts(k_alloc, k_star)
    n = len(k_alloc)
    return 1.0 + counts, n - np.cumsum(counts) + a


def update_sticks(k_alloc, a: float, k_star: int, rng: np.random.Generator) -> np.ndarray:
    a1, b1 = stick_beta_params(k_alloc, a, k_star)
    return rng.beta(a1, b1)


def extend_sticks(state: StickState, u_min: float, a: float, base, rng: np.random.Generator,
                  ) -> StickState:
    """Append prior sticks B(1, a) and base-measure scales until the
    retained weights cover more than ``1 - u_min``; sets ``k_star``."""
    if not 0 < u_min < 1:
        raise ValueError("u_min must lie in (0, 1)")
    c0, d0 = base
    omega = list(state.omega)
    phis = list(state.phi_clusters)
    pi = stick_weights(omega)
    csum = np.cumsum(pi)
    target = 1.0 - u_min
    hit = np.flatnonzero(csum > target)
    if hit.size:
        return StickState(np.asarray(omega), np.asarray(phis), int(hit[0]) + 1)
    total = float(csum[-1]) if len(csum) else 0.0
    remaining = float(np.prod(1.0 - np.asarray(omega))) if omega else 1.0
    while total <= target:
        if len(omega) >= MAX_STICKS:
            raise NumericalDegeneracyError("stick extension exceeded the iteration cap")
        w = rng.beta(1.0, a)
        omega.append(w)
        phis.append(float(invgamma_draw(c0, d0, rng)))
        total += w * remaining
        remaining *= 1.0 - w
        if remaining <= 0.0:
            # all mass consumed in floating point
            break
    return StickState(np.asarray(omega), np.asarray(phis), len(omega))


def coverage_ok(state: StickState, u) -> bool:
    pi = stick_weights(state.omega)
    return float(pi[: state.k_star].sum()) > 1.0 - float(np.min(u))


def alloc_logdens(v, phis, alpha, family: str) -> np.ndarray:
    """n x K matrix of first-stage log densities under each cluster scale."""
    v = np.asarray(v, dtype=float)[:, None]
    phis = np.asarray(phis, dtype=float)[None, :]
    if family in ("al", "aldp"):
        return al_logdens(v, phis, alpha)
    if family in ("sn", "sndp"):
        return sn_logdens(v, phis, alpha)
    raise ValueError(f"unknown allocation family {family!r}")


def alloc_probs(v, state: StickState, u, alpha, family: str) -> np.ndarray:
    """Normalised Pr(k_i = l) over the slice-admissible clusters l < k*."""
    K = state.k_star
    pi = stick_weights(state.omega)[:K]
    logf = alloc_logdens(v, state.phi_clusters[:K], alpha, family)
    admissible = np.asarray(u)[:, None] < pi[None, :]
    if not np.all(admissible.any(axis=1)):
        raise NumericalDegeneracyError("empty admissible cluster set; sticks not extended")
    logf = np.where(admissible, logf, -np.inf)
    logf -= logf.max(axis=1, keepdims=True)
    prob = np.exp(logf)
    return prob / prob.sum(axis=1, keepdims=True)


def update_alloc(v, state: StickState, u, alpha, family: str, rng: np.random.Generator):
    prob = alloc_probs(v, state, u, alpha, family)
    cdf = np.cumsum(prob, axis=1)
    r = rng.random((prob.shape[0], 1)) * cdf[:, -1:]
    return np.minimum((cdf <= r).sum(axis=1), prob.shape[1] - 1).astype(np.intp)


def cluster_scale_params_aldp(v, h, k_alloc, alpha, base, k_star):
    """IG shape/rate for each cluster scale under the AL mixture representation."""
    c0, d0 = base
    tt = theta_tau(alpha)
    counts = cluster_counts(k_alloc, k_star)
    terms = h + (v - tt.theta * h) ** 2 / (2.0 * tt.tau2 * h)
    rates = np.bincount(k_alloc, weights=terms, minlength=k_star)[:k_star] + d0
    return 1.5 * counts + c0, rates


def update_cluster_scales_aldp(v, h, k_alloc, alpha, base, rng, k_star=None):
    k_star = int(k_alloc.max()) + 1 if k_star is None else k_star
    shape, rate = cluster_scale_params_aldp(v, h, k_alloc, alpha, base, k_star)
    return invgamma_draw(shape, rate, rng)


def cluster_scale_params_sndp(v, k_alloc, alpha, base, k_star):
    """Conjugate IG shape/rate for cluster scales under the SN kernel."""
    c0, d0 = base
    counts = cluster_counts(k_alloc, k_star)
    wt = alpha - (v <= 0)
    terms = 2.0 * v * v * wt * wt
    rates = np.bincount(k_alloc, weights=terms, minlength=k_star)[:k_star] + d0
    return 0.5 * counts + c0, rates


def update_cluster_scales_sndp(v, k_alloc, alpha, base, rng, k_star=None):
    k_star = int(k_alloc.max()) + 1 if k_star is None else k_star
    shape, rate = cluster_scale_params_sndp(v, k_alloc, alpha, base, k_star)
    return invgamma_draw(shape, rate, rng)


def precision_mixture(n_star: int, n: int, a0: float, b0: float, c: float):
    """Escobar-West two-gamma mixture: weight of the first component, shapes, rate."""
    rate = b0 - np.log(c)
    odds = (a0 + n_star - 1.0) / (n * rate)
    return odds / (1.0 + odds), (a0 + n_star, a0 + n_star - 1.0), rate


def update_precision_a(n_star: int, n: int, a_prior, a: float, rng: np.random.Generator) -> float:
    if not 1 <= n_star <= n:
        raise ValueError("need 1 <= n_star <= n")
    a0, b0 = a_prior
    c = rng.beta(a + 1.0, n)
    while c < 1e-300:
        c = rng.beta(a + 1.0, n)
    weight, (s1, s2), rate = precision_mixture(n_star, n, a0, b0, c)
    shape = s1 if rng.random() < weight else s2
    return float(rng.standard_gamma(shape) / rate)


def precision_sticks_params(omega, a_prior):
    """Gamma shape/rate of a given the instantiated sticks omega_1..omega_L.

    With labelled sticks the label vector depends on a beyond the number of
    occupied clusters, so this (not the two-gamma mixture above) is the full
    conditional in the slice sampler's state space.
    """
    a0, b0 = a_prior
    omega = np.minimum(np.asarray(omega, dtype=float), 1.0 - 2.0**-53)
    return a0 + len(omega), b0 - float(np.log1p(-omega).sum())


def update_precision_sticks(omega, a_prior, rng: np.random.Generator) -> float:
    shape, rate = precision_sticks_params(omega, a_prior)
    return float(rng.standard_gamma(shape) / rate)
