"""Densities, CDFs, moments and random variates for the error families.

Every family used by the samplers lives here: asymmetric Laplace (AL),
skew normal (SN, the two-piece normal with a quantile constraint at zero),
asymmetric exponential power (AEP), the GIG(1/2) full conditional of the
exponential mixing variables, truncated normal, skew-t and inverse gamma.

Public ``*_logpdf``/``*_cdf`` functions take a parameter dataclass. The
``*_logdens`` variants take raw (broadcastable) arrays and skip validation;
they are what the MCMC kernels call in their inner loops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

_EDGE = 1e-8
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class UnsupportedIndexError(ValueError):
    """Raised when a GIG draw is requested for an index other than 1/2."""


def _check_unit(name: str, value: float) -> None:
    if not (_EDGE < value < 1.0 - _EDGE):
        raise ValueError(f"{name} must lie in (0, 1) away from the edges, got {value!r}")


def _check_positive(name: str, value: float) -> None:
    if not (value > 0.0 and math.isfinite(value)):
        raise ValueError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class ALParams:
    sigma: float
    p: float

    def __post_init__(self):
        _check_positive("sigma", self.sigma)
        _check_unit("p", self.p)


@dataclass(frozen=True)
class SNParams:
    phi: float
    alpha: float

    def __post_init__(self):
        _check_positive("phi", self.phi)
        _check_unit("alpha", self.alpha)


@dataclass(frozen=True)
class AEPParams:
    phi: float
    alpha: float
    zeta1: float
    zeta2: float

    def __post_init__(self):
        _check_positive("phi", self.phi)
        _check_unit("alpha", self.alpha)
        _check_positive("zeta1", self.zeta1)
        _check_positive("zeta2", self.zeta2)


@dataclass(frozen=True)
class GIGParams:
    """GIG(nu, xi, chi) with density proportional to
    ``x**(nu-1) * exp(-(xi**2 / x + chi**2 * x) / 2)``."""

    nu: float
    xi: float
    chi: float

    def __post_init__(self):
        if self.xi < 0 or self.chi < 0:
            raise ValueError("xi and chi must be nonnegative")
        if self.xi == 0 and self.chi == 0:
            raise ValueError("xi and chi cannot both be zero")


@dataclass(frozen=True)
class SkewTParams:
    """Azzalini skew-t: location ``mu``, squared scale ``sigma2``,
    skewness ``alpha_st`` and degrees of freedom ``nu_st``."""

    mu: float
    sigma2: float
    alpha_st: float
    nu_st: float

    def __post_init__(self):
        _check_positive("sigma2", self.sigma2)
        _check_positive("nu_st", self.nu_st)


def check_loss(u, p):
    """Quantile check function ``u * (p - I(u < 0))``."""
    u = np.asarray(u, dtype=float)
    return u * (p - (u < 0))


def _finite(v):
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("density argument must be finite")
    return v


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


# ---------------------------------------------------------------- AL


def al_logdens(v, sigma, p):
    v = np.asarray(v, dtype=float)
    return np.log(p * (1.0 - p) / sigma) - v * (p - (v < 0)) / sigma


def al_logpdf(v, params: ALParams):
    return _scalar(al_logdens(_finite(v), params.sigma, params.p))


def al_cdf(v, params: ALParams):
    s, p = params.sigma, params.p
    v = np.asarray(v, dtype=float)
    with np.errstate(over="ignore"):
        left = p * np.exp((1.0 - p) * np.minimum(v, 0.0) / s)
        right = 1.0 - (1.0 - p) * np.exp(-p * np.maximum(v, 0.0) / s)
    return _scalar(np.where(v <= 0, left, right))


def al_moments(params: ALParams) -> tuple[float, float]:
    s, p = params.sigma, params.p
    mean = s * (1 - 2 * p) / (p * (1 - p))
    var = s**2 * (1 - 2 * p + 2 * p**2) / (p**2 * (1 - p) ** 2)
    return mean, var


def al_sample(params: ALParams, rng: np.random.Generator, size=None):
    """Two-sided exponential construction: left with probability p."""
    s, p = params.sigma, params.p
    e = rng.standard_exponential(size)
    left = rng.random(size) < p
    return np.where(left, -s * e / (1.0 - p), s * e / p) if size is not None else (
        -s * e / (1.0 - p) if left else s * e / p
    )


# ---------------------------------------------------------------- SN


def _sn_halfscales(phi, alpha):
    # standard deviations of the left and right half-normal pieces
    sq = np.sqrt(phi)
    return sq / (2.0 * (1.0 - alpha)), sq / (2.0 * alpha)


def sn_logdens(v, phi, alpha):
    v = np.asarray(v, dtype=float)
    w = alpha - (v <= 0)
    return (
        np.log(4.0 * alpha * (1.0 - alpha))
        - _LOG_SQRT_2PI
        - 0.5 * np.log(phi)
        - 2.0 * v * v * w * w / phi
    )


def sn_logpdf(v, params: SNParams):
    return _scalar(sn_logdens(_finite(v), params.phi, params.alpha))


def sn_cdf(v, params: SNParams):
    sl, sr = _sn_halfscales(params.phi, params.alpha)
    a = params.alpha
    v = np.asarray(v, dtype=float)
    left = 2.0 * a * special.ndtr(np.minimum(v, 0.0) / sl)
    right = a + (1.0 - a) * (2.0 * special.ndtr(np.maximum(v, 0.0) / sr) - 1.0)
    return _scalar(np.where(v <= 0, left, right))


def sn_moments(params: SNParams) -> tuple[float, float]:
    phi, a = params.phi, params.alpha
    mean = math.sqrt(phi / (2 * math.pi)) * (1 - 2 * a) / (a * (1 - a))
    var = phi * (math.pi * (1 - 3 * a + 3 * a * a) - 2 * (1 - 2 * a) ** 2) / (
        4 * math.pi * a * a * (1 - a) ** 2
    )
    return mean, var


def sn_sample(params: SNParams, rng: np.random.Generator, size=None):
    sl, sr = _sn_halfscales(params.phi, params.alpha)
    z = np.abs(rng.standard_normal(size))
    left = rng.random(size) < params.alpha
    return np.where(left, -sl * z, sr * z) if size is not None else (-sl * z if left else sr * z)


# ---------------------------------------------------------------- AEP


def _aep_scales(phi, alpha, zeta1, zeta2):
    return (
        alpha * phi / special.gamma(1.0 + 1.0 / zeta1),
        (1.0 - alpha) * phi / special.gamma(1.0 + 1.0 / zeta2),
    )


def aep_logdens(v, phi, alpha, zeta1, zeta2):
    v = np.asarray(v, dtype=float)
    s1, s2 = _aep_scales(phi, alpha, zeta1, zeta2)
    left = v <= 0
    scale = np.where(left, s1, s2)
    shape = np.where(left, zeta1, zeta2)
    # log-space power keeps |v| large from overflowing before exponentiation
    with np.errstate(divide="ignore"):
        t = np.exp(shape * (np.log(np.abs(v)) - np.log(scale)))
    return -np.log(phi) - t


def aep_logpdf(v, params: AEPParams):
    return _scalar(
        aep_logdens(_finite(v), params.phi, params.alpha, params.zeta1, params.zeta2)
    )


def aep_cdf(v, params: AEPParams):
    phi, a, z1, z2 = params.phi, params.alpha, params.zeta1, params.zeta2
    s1, s2 = _aep_scales(phi, a, z1, z2)
    v = np.asarray(v, dtype=float)
    with np.errstate(divide="ignore"):
        tl = np.exp(z1 * (np.log(np.abs(np.minimum(v, 0.0))) - math.log(s1)))
        tr = np.exp(z2 * (np.log(np.maximum(v, 0.0)) - math.log(s2)))
    left = a * special.gammaincc(1.0 / z1, tl)
    right = a + (1.0 - a) * special.gammainc(1.0 / z2, tr)
    return _scalar(np.where(v <= 0, left, right))


def aep_sample(params: AEPParams, rng: np.random.Generator, size=None):
    phi, a, z1, z2 = params.phi, params.alpha, params.zeta1, params.zeta2
    s1, s2 = _aep_scales(phi, a, z1, z2)
    left = rng.random(size) < a
    g1 = rng.standard_gamma(1.0 / z1, size)
    g2 = rng.standard_gamma(1.0 / z2, size)
    out = np.where(left, -s1 * g1 ** (1.0 / z1), s2 * g2 ** (1.0 / z2))
    return out if size is not None else float(out)


# ---------------------------------------------------------------- GIG(1/2)


def gig_half(xi, chi, rng: np.random.Generator):
    """Vectorised GIG(1/2, xi, chi) draws via the reciprocal inverse Gaussian.

    If X ~ GIG(1/2, xi, chi) then 1/X is inverse Gaussian with mean chi/xi
    and shape chi**2. The Michael-Schucany-Haas root is rewritten in terms of
    ``xi`` so that ``xi = 0`` (the Gamma(1/2, chi**2/2) limit) is exact and
    large means lose no precision to cancellation. Requires ``chi > 0``.
    """
    xi, chi = np.broadcast_arrays(np.asarray(xi, float), np.asarray(chi, float))
    n2 = rng.standard_normal(xi.shape) ** 2
    b = n2 / (2.0 * chi)
    # q = xi * (1 + a + sqrt(a^2 + 2a)) with a = n^2 / (2 xi chi)
    q = xi + b + np.sqrt(b * b + 2.0 * b * xi)
    q = np.maximum(q, 1e-300)
    x_big = q / chi
    x_small = xi * xi / (chi * q)
    accept_big = rng.random(xi.shape) * (q + xi) < q
    return np.where(accept_big, x_big, x_small)


def gig_sample(params: GIGParams, rng: np.random.Generator, size=None):
    if params.nu != 0.5:
        raise UnsupportedIndexError(f"only nu = 1/2 is supported, got {params.nu}")
    if params.chi <= 0:
        raise ValueError("chi must be positive for sampling")
    out = gig_half(np.full(size if size is not None else (), params.xi), params.chi, rng)
    return out if size is not None else float(out)


def gig_half_moments(xi: float, chi: float) -> tuple[float, float]:
    """Mean and variance of GIG(1/2, xi, chi) from the Bessel-function ratios.

    For half-integer indices the Bessel ratios are elementary:
    E[X] = (xi/chi)(1 + 1/w), E[X^2] = (xi/chi)^2 (1 + 3/w + 3/w^2), w = xi chi.
    """
    if xi == 0:
        return 1.0 / chi**2, 2.0 / chi**4
    w = xi * chi
    r = xi / chi
    m1 = r * (1.0 + 1.0 / w)
    m2 = r * r * (1.0 + 3.0 / w + 3.0 / (w * w))
    return m1, m2 - m1 * m1


# ---------------------------------------------------------------- truncated normal

_TAIL = 4.0


def _tail_draw(a, b, rng):
    """Standard normal restricted to (a, b) with a >= 4 (exponential rejection)."""
    out = np.empty(a.shape)
    todo = np.arange(a.size)
    while todo.size:
        aa, bb = a[todo], b[todo]
        narrow = (bb - aa) < 1.0 / aa
        lam = 0.5 * (aa + np.sqrt(aa * aa + 4.0))
        x_exp = aa + rng.standard_exponential(todo.size) / lam
        x_uni = aa + (np.where(np.isfinite(bb), bb, aa) - aa) * rng.random(todo.size)
        x = np.where(narrow, x_uni, x_exp)
        log_acc = np.where(narrow, -0.5 * (x * x - aa * aa), -0.5 * (x - lam) ** 2)
        ok = (np.log(rng.random(todo.size)) < log_acc) & (x < bb)
        out[todo[ok]] = x[ok]
        todo = todo[~ok]
    return out


def tn_sample(mu, sigma2, lower, upper, rng: np.random.Generator):
    """Draws from N(mu, sigma2) restricted to (lower, upper); broadcasts.

    Inverse CDF on the side of the mode where it is accurate; exponential
    rejection once the interval starts more than 4 sd from ``mu``.
    """
    mu, s2, lo, hi = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (mu, sigma2, lower, upper))
    )
    if np.any(lo >= hi):
        raise ValueError("empty truncation interval")
    s = np.sqrt(s2)
    a = (lo - mu) / s
    b = (hi - mu) / s
    # reflect so the interval never lies wholly in the right half-line
    flip = a > 0
    a, b = np.where(flip, -b, a), np.where(flip, -a, b)
    # now a < 0 or interval straddles; tail case is b <= -4
    z = np.empty(a.shape)
    tail = b <= -_TAIL
    if np.any(tail):
        z[tail] = -_tail_draw(-b[tail], -a[tail], rng)
    body = ~tail
    if np.any(body):
        pa = special.ndtr(a[body])
        pb = special.ndtr(b[body])
        u = rng.random(pa.shape)
        z[body] = special.ndtri(pa + u * (pb - pa))
        # guard against rounding onto the boundary
        z[body] = np.clip(z[body], a[body], b[body])
    z = np.where(flip, -z, z)
    out = mu + s * z
    return _scalar(out)


def tn_mean(mu, sigma2, lower, upper):
    """Closed-form mean of the truncated normal (used as a test oracle).

    Evaluated in log space on the left of the mode so far tails stay finite.
    """
    s = math.sqrt(sigma2)
    a, b = (lower - mu) / s, (upper - mu) / s
    sign = 1.0
    if a > -b:
        a, b, sign = -b, -a, -1.0
    log_z = special.log_ndtr(b) + math.log1p(-math.exp(special.log_ndtr(a) - special.log_ndtr(b)))
    log_pdf = lambda t: -math.inf if math.isinf(t) else -0.5 * t * t - 0.5 * math.log(2 * math.pi)
    ratio = math.exp(log_pdf(a) - log_z) - math.exp(log_pdf(b) - log_z)
    return mu + sign * s * ratio


# ---------------------------------------------------------------- skew-t and IG


def skewt_sample(params: SkewTParams, rng: np.random.Generator, size=None):
    """Skew-normal numerator over sqrt(chi2_nu / nu), then location-scale."""
    d = params.alpha_st / math.sqrt(1.0 + params.alpha_st**2)
    z = d * np.abs(rng.standard_normal(size)) + math.sqrt(1.0 - d * d) * rng.standard_normal(size)
    w = rng.chisquare(params.nu_st, size) / params.nu_st
    out = params.mu + math.sqrt(params.sigma2) * z / np.sqrt(w)
    return out if size is not None else float(out)


def skewt_std_draws(alpha_st, nu_st, rng, size):
    """Standard (mu=0, sigma=1) skew-t draws, vectorised for data generators."""
    return skewt_sample(SkewTParams(0.0, 1.0, alpha_st, nu_st), rng, size)


def invgamma_cdf(x, shape: float, scale: float):
    """CDF of the inverse gamma with density proportional to x^(-shape-1) e^(-scale/x)."""
    _check_positive("shape", shape)
    _check_positive("scale", scale)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("x must be positive")
    return _scalar(special.gammaincc(shape, scale / x))


def invgamma_draw(shape, scale, rng: np.random.Generator):
    """IG(shape, scale) draws; broadcasts over array arguments."""
    shape = np.asarray(shape, dtype=float)
    return np.asarray(scale, dtype=float) / rng.standard_gamma(shape)
